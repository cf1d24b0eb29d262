"""Published storage ratios for the 21-cell system, checked to 4 decimals."""

# (J, K, (M, N, P), (m, n, p), model, R_s)
STORAGE_ROWS = [
    (21, 5, (64, 512, 401), (60, 230, 150), "individual", 5.8354),
    (21, 5, (64, 512, 401), (60, 230, 150), "shared", 6.1684),
    (21, 5, (64, 512, 401), (60, 230, 150), "groupwise", 6.1648),
    (21, 10, (64, 512, 401), (60, 270, 190), "individual", 3.9863),
    (21, 10, (64, 512, 401), (60, 270, 190), "shared", 4.1658),
    (21, 10, (64, 512, 401), (60, 270, 190), "groupwise", 4.1648),
    (21, 5, (8, 256, 401), (8, 130, 120), "individual", 3.9815),
    (21, 5, (8, 256, 401), (8, 130, 120), "shared", 4.7489),
    (21, 5, (8, 256, 401), (8, 130, 120), "groupwise", 4.7405),
    (21, 10, (8, 256, 401), (8, 140, 140), "individual", 3.3003),
    (21, 10, (8, 256, 401), (8, 140, 140), "shared", 3.8566),
    (21, 10, (8, 256, 401), (8, 140, 140), "groupwise", 3.8536),
]
