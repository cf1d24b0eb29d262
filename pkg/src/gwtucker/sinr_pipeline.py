"""
Per-stream SINR through the full and the compressed pipelines.

Full path, per user ``[i, j]``:

1. ``H_k = X_k x_3 c_k^*`` for every link,
2. SVD precoders ``V`` from each serving channel,
3. covariance ``Q = sum H_k V V^* H_k^* + sigma^2 I_M``,
4. MMSE filter ``W = Q^{-1} H_i V``,
5. ``s_r = |w_r^* H_i v_r|^2`` and ``SINR_r = s_r / (w_r^* Q w_r - s_r)``.

The compressed path runs the same stages on the ``m x n`` matrices
``Ht = G x_3 (c^* C)``. The factors A (per user) and B (per base) never
enter the arithmetic: with ``H ~ A Ht B^T`` one has ``V = conj(B) Vt``,
``Q = A (Qt - sigma^2 I_m) A^* + sigma^2 I_M`` and by Woodbury

    Q^{-1} = (I_M - A T A^*) / sigma^2,   T = Qt^{-1} (Qt - sigma^2 I_m),

so ``W = A Wt`` with ``Wt = (I_m - T) Ht Vt / sigma^2 = Qt^{-1} Ht Vt``.
The SINR denominator follows from ``W^* Q W = Wt^* Qt Wt`` (A has
orthonormal columns), hence every quantity is evaluated at size m.

Flop charges use unit constants for every O(.) term.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .channel_model import (ChannelSet, InterferenceScope, SystemTopology,
                            assemble_channel_compressed, assemble_channel_full)
from .decomposition import CompressionRanks, GroupwiseFactorSet
from .flops import FlopLedger

__all__ = [
    "FlopLedger",
    "SinrReport",
    "SingularCovarianceError",
    "InvalidSinrError",
    "precoder_full",
    "precoder_compressed",
    "covariance_full",
    "covariance_compressed",
    "filter_full",
    "woodbury_inverse_apply",
    "filter_compressed",
    "sinr_full",
    "sinr_compressed",
    "flop_terms",
    "flop_estimate",
    "full_pipeline",
    "compressed_pipeline",
    "sinr_from_channels",
    "approximate_channels",
]

# Qt with estimated condition number above this is treated as singular
MAX_CONDITION = 1e14
_DENOM_SLACK = 1e-12


class SingularCovarianceError(np.linalg.LinAlgError):
    """Covariance too ill-conditioned to invert reliably."""


class InvalidSinrError(ArithmeticError):
    """SINR denominator came out negative (numerically invalid setup)."""


@dataclass
class SinrReport:
    """
    Outcome of one pipeline run.

    signal, sinr : ndarray (J, K, L), linear scale, indexed [i, j, r]
    """

    path: str
    signal: np.ndarray
    sinr: np.ndarray
    ledger: FlopLedger = field(default_factory=FlopLedger)
    duration: float = 0.0

    @property
    def sinr_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.sinr)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite values in pipeline input")


def _truncated_svd(H, L):
    """Leading-L SVD with each right vector phase-normalised (U follows)."""
    H = np.asarray(H, dtype=np.complex128)
    rows, cols = H.shape
    if L > min(rows, cols):
        raise ValueError(
            f"{L} streams requested from a {rows}x{cols} channel; "
            f"at most {min(rows, cols)} are available")
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    V = np.conj(Vh[:L].T)
    U = U[:, :L]
    idx = np.argmax(np.abs(V), axis=0)
    piv = V[idx, np.arange(L)]
    mag = np.abs(piv)
    phase = np.where(mag > 0, np.conj(piv) / np.where(mag > 0, mag, 1.0), 1.0)
    # H v = sigma u is kept by rotating u with the same phase
    return V * phase, s[:L].copy(), U * phase


def precoder_full(H, L: int, ledger: FlopLedger = None):
    """
    SVD precoder of a serving channel.

    Returns
    -------
    V : (N, L) right singular vectors
    sigmas : (L,) singular values, non-increasing
    U : (M, L) matching left singular vectors
    """
    V, s, U = _truncated_svd(H, L)
    if ledger is not None:
        M, N = np.shape(H)
        ledger.charge("precoder", M * N * L)
    return V, s, U


def precoder_compressed(Ht, L: int, ledger: FlopLedger = None):
    """Precoder ``Vt`` of a compressed channel; ``B_k Vt`` is the full one."""
    return precoder_full(Ht, L, ledger)


def _covariance(H_grid, V_grid, user, scope, sigma, ledger):
    H_grid = np.asarray(H_grid)
    V_grid = np.asarray(V_grid)
    J, J2, K = H_grid.shape[:3]
    if V_grid.shape[:2] != (J, K):
        raise ValueError(
            f"precoder grid covers {V_grid.shape[:2]} users, scope needs {(J, K)}")
    i, j = user
    scope = InterferenceScope(scope)
    M = H_grid.shape[3]
    Q = (sigma ** 2) * np.eye(M, dtype=np.complex128)
    terms = scope.terms(i, j, J, K)
    for k, l in terms:
        HV = H_grid[k, i, j] @ V_grid[k, l]
        Q += HV @ np.conj(HV.T)
    if ledger is not None:
        N = H_grid.shape[4]
        L = V_grid.shape[3]
        ledger.charge("covariance", len(terms) * (M * N * L + M * M * L))
    return Q


def covariance_full(H_grid, V_grid, user, scope=InterferenceScope.PAPER_EXPERIMENT,
                    sigma: float = 0.1, ledger: FlopLedger = None):
    """
    Received-signal covariance of user ``[i, j]``.

    H_grid : (J, J, K, M, N) channel matrices indexed [k, i, j]
    V_grid : (J, K, N, L) precoders indexed [k, l]
    """
    return _covariance(H_grid, V_grid, user, scope, sigma, ledger)


def covariance_compressed(Ht_grid, Vt_grid, user, scope=InterferenceScope.PAPER_EXPERIMENT,
                          sigma: float = 0.1, ledger: FlopLedger = None):
    """
    Compressed covariance ``Qt`` (m x m) of user ``[i, j]``.

    Valid because every link into the user shares the user's A factor.
    """
    return _covariance(Ht_grid, Vt_grid, user, scope, sigma, ledger)


def filter_full(Q, H, V, ledger: FlopLedger = None):
    """MMSE filter ``W = Q^{-1} H V`` via a Cholesky solve."""
    _check_finite(Q, H, V)
    HV = np.asarray(H) @ np.asarray(V)
    W = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Q), HV)
    if ledger is not None:
        M = Q.shape[0]
        L = HV.shape[1]
        ledger.charge("inverse", M ** 3)
        ledger.charge("filter", M * M * L)
    return W


def woodbury_inverse_apply(Qt, sigma: float, ledger: FlopLedger = None):
    """
    Small-form inverse of the full covariance.

    Returns ``(T, 1/sigma^2)`` with ``T = Qt^{-1} (Qt - sigma^2 I)`` so that
    ``Q^{-1} = (I_M - A T A^*) / sigma^2``.

    Raises
    ------
    SingularCovarianceError
        If `Qt` is not positive definite or its estimated condition number
        exceeds ``MAX_CONDITION``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    Qt = np.asarray(Qt, dtype=np.complex128)
    _check_finite(Qt)
    m = Qt.shape[0]
    try:
        factor = scipy.linalg.cho_factor(Qt)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"compressed covariance not positive definite: {exc}")
    anorm = np.abs(Qt).sum(axis=0).max()
    rcond, info = lapack.zpocon(np.triu(factor[0]), anorm)
    if info != 0 or rcond * MAX_CONDITION < 1.0:
        raise SingularCovarianceError(
            f"compressed covariance condition estimate {1.0 / max(rcond, 1e-300):.3g} "
            f"exceeds {MAX_CONDITION:.0e}")
    T = scipy.linalg.cho_solve(factor, Qt - sigma ** 2 * np.eye(m))
    if ledger is not None:
        ledger.charge("inverse", 2 * m ** 3)
    return T, 1.0 / sigma ** 2


def filter_compressed(Qt, Ht, Vt, sigma: float, T=None, ledger: FlopLedger = None):
    """
    Compressed MMSE filter ``Wt = (I_m - T) Ht Vt / sigma^2``.

    `T` comes from :func:`woodbury_inverse_apply`; it is computed here when
    not supplied. The full filter is ``A Wt``.
    """
    _check_finite(Ht, Vt)
    if T is None:
        T, _ = woodbury_inverse_apply(Qt, sigma, ledger)
    HV = np.asarray(Ht) @ np.asarray(Vt)
    m = HV.shape[0]
    Wt = (np.eye(m) - T) @ HV / sigma ** 2
    if ledger is not None:
        L = HV.shape[1]
        ledger.charge("filter", m * m * L + m * L)
    return Wt


def _streams(W, Q, HV, ledger):
    W = np.asarray(W)
    Q = np.asarray(Q)
    size, L = W.shape
    s = np.abs(np.einsum("ar,ar->r", np.conj(W), HV)) ** 2
    quad = np.real(np.einsum("ar,ab,br->r", np.conj(W), Q, W))
    denom = quad - s
    sinr = np.zeros(L)
    for r in range(L):
        if denom[r] < -_DENOM_SLACK * max(1.0, abs(quad[r])):
            raise InvalidSinrError(f"stream {r}: interference power {denom[r]:.3e} < 0")
        if s[r] == 0.0:
            continue
        if denom[r] <= 0:
            raise InvalidSinrError(f"stream {r}: zero interference-plus-noise power")
        sinr[r] = s[r] / denom[r]
    if ledger is not None:
        ledger.charge("sinr", L * (size * size + 2 * size))
    return s, sinr


def sinr_full(W, Q, H, V, ledger: FlopLedger = None):
    """Per-stream signal power and SINR for the full pipeline."""
    return _streams(W, Q, np.asarray(H) @ np.asarray(V), ledger)


def sinr_compressed(Wt, Qt, Ht, Vt, ledger: FlopLedger = None):
    """
    Per-stream signal power and SINR from compressed quantities.

    ``A^* A = I`` removes A from ``s_r``; the denominator uses
    ``Wt^* Qt Wt`` which equals ``W^* Q W``.
    """
    return _streams(Wt, Qt, np.asarray(Ht) @ np.asarray(Vt), ledger)


# --- cost model ---------------------------------------------------------------

def _n_terms(topology, scope):
    scope = InterferenceScope(scope)
    return topology.J * topology.K if scope is InterferenceScope.FULL else topology.J


def flop_terms(topology: SystemTopology, ranks=None, path: str = "full",
               scope=InterferenceScope.FULL, model: str = "groupwise"):
    """
    Unit costs per stage.

    ``reconstruct`` is per link, ``sinr`` per stream, the rest per user.
    Entries are plain arithmetic on the dimensions, so symbolic dimension
    objects (e.g. sympy symbols) pass through unchanged.
    """
    t = topology
    M, N, P, L = t.M, t.N, t.P, t.L
    terms = _n_terms(t, scope)
    if path == "full":
        return {
            "reconstruct": M * N * P,
            "precoder": M * N * L,
            "covariance": terms * (M * N * L + M ** 2 * L),
            "inverse": M ** 3,
            "filter": M ** 2 * L,
            "sinr": M ** 2 + M + M,
        }
    if path != "compressed":
        raise ValueError(f"path must be 'full' or 'compressed', got {path!r}")
    m, n, p = (ranks.m, ranks.n, ranks.p) if isinstance(ranks, CompressionRanks) else ranks
    if model == "individual":
        # per-link factors cannot be eliminated: rebuild A Ht B^T then run full
        costs = flop_terms(t, None, "full", scope)
        costs["reconstruct"] = m * n * p + P * p + M * m * n + M * n * N
        return costs
    return {
        "reconstruct": m * n * p + P * p,
        "precoder": m * n * L,
        "covariance": terms * (m * n * L + m ** 2 * L),
        "inverse": m ** 3 + m ** 3,
        "filter": m ** 2 * L + m * L,
        "sinr": m ** 2 + m + m,
    }


def flop_estimate(topology: SystemTopology, ranks=None, path: str = "full",
                  scope=InterferenceScope.FULL, model: str = "groupwise") -> FlopLedger:
    """Closed-form system-wide ledger for one SINR evaluation."""
    t = topology
    unit = flop_terms(t, ranks, path, scope, model)
    users = t.J * t.K
    return FlopLedger(
        reconstruct=t.J * t.J * t.K * unit["reconstruct"],
        precoder=users * unit["precoder"],
        covariance=users * unit["covariance"],
        inverse=users * unit["inverse"],
        filter=users * unit["filter"],
        sinr=users * t.L * unit["sinr"],
    )


# --- pipelines --------------------------------------------------------------

def sinr_from_channels(H_grid, L: int, sigma: float,
                       scope=InterferenceScope.PAPER_EXPERIMENT,
                       ledger: FlopLedger = None):
    """
    Precoder, covariance, filter and SINR stages on assembled channels.

    Returns ``(signal, sinr)`` arrays of shape (J, K, L).
    """
    H_grid = np.asarray(H_grid)
    J, _, K, M, N = H_grid.shape
    V_grid = np.empty((J, K, N, L), dtype=np.complex128)
    for k in range(J):
        for l in range(K):
            V_grid[k, l] = precoder_full(H_grid[k, k, l], L, ledger)[0]
    signal = np.zeros((J, K, L))
    sinr = np.zeros((J, K, L))
    for i in range(J):
        for j in range(K):
            Q = covariance_full(H_grid, V_grid, (i, j), scope, sigma, ledger)
            W = filter_full(Q, H_grid[i, i, j], V_grid[i, j], ledger)
            signal[i, j], sinr[i, j] = sinr_full(W, Q, H_grid[i, i, j], V_grid[i, j], ledger)
    return signal, sinr


def full_pipeline(channels: ChannelSet, scope=InterferenceScope.PAPER_EXPERIMENT,
                  L: int = None, sigma: float = None) -> SinrReport:
    """Reconstruct every channel from its tensor, then evaluate SINR."""
    t = channels.topology
    L = t.L if L is None else L
    sigma = t.sigma if sigma is None else sigma
    ledger = FlopLedger()
    start = time.perf_counter()
    H_grid = np.empty((t.J, t.J, t.K, t.M, t.N), dtype=np.complex128)
    for k, i, j in channels.links():
        H_grid[k, i, j] = assemble_channel_full(
            channels.tensors[k, i, j], channels.coeffs[k, i, j], ledger)
    signal, sinr = sinr_from_channels(H_grid, L, sigma, scope, ledger)
    return SinrReport("full", signal, sinr, ledger, time.perf_counter() - start)


def _compressed_channels(factors, coeffs, ledger):
    J, K = factors.grid
    m, n, _ = factors.G.shape[3:]
    Ht = np.empty((J, J, K, m, n), dtype=np.complex128)
    for k in range(J):
        for i in range(J):
            for j in range(K):
                Ht[k, i, j] = assemble_channel_compressed(
                    factors.G[k, i, j], factors.C[k, i, j], coeffs[k, i, j], ledger)
    return Ht


def approximate_channels(factors: GroupwiseFactorSet, coeffs) -> np.ndarray:
    """
    Explicit channel approximation for every link, shape (J, J, K, M, N).

    The core carries ``X x_2 B^*``, i.e. slices ``A^* X_l conj(B)``, so the
    rebuilt matrix is ``A Ht B^T``.
    """
    Ht = _compressed_channels(factors, coeffs, None)
    return np.einsum("...aq,...qr,...br->...ab", factors.link_A(), Ht,
                     factors.link_B())


def compressed_pipeline(factors: GroupwiseFactorSet, coeffs, L: int, sigma: float,
                        scope=InterferenceScope.PAPER_EXPERIMENT) -> SinrReport:
    """
    SINR straight from the compressed representation.

    Groupwise and shared factors run entirely at compressed size. Individual
    factors differ per link, so their channels are rebuilt as ``A Ht B^T``
    and sent through the full stages.
    """
    if factors.G is None:
        raise ValueError("factor set has no cores; compute them before evaluating")
    coeffs = np.asarray(coeffs)
    ledger = FlopLedger()
    start = time.perf_counter()
    Ht = _compressed_channels(factors, coeffs, ledger)
    J, _, K, m, n = Ht.shape

    if factors.model == "individual":
        A = factors.link_A()
        B = factors.link_B()
        H_grid = np.einsum("...aq,...qr,...br->...ab", A, Ht, B)
        M, N = A.shape[-2], B.shape[-2]
        ledger.charge("reconstruct", J * J * K * (M * m * n + M * n * N))
        signal, sinr = sinr_from_channels(H_grid, L, sigma, scope, ledger)
        return SinrReport("compressed", signal, sinr, ledger, time.perf_counter() - start)

    Vt_grid = np.empty((J, K, n, L), dtype=np.complex128)
    for k in range(J):
        for l in range(K):
            Vt_grid[k, l] = precoder_compressed(Ht[k, k, l], L, ledger)[0]
    signal = np.zeros((J, K, L))
    sinr = np.zeros((J, K, L))
    for i in range(J):
        for j in range(K):
            Qt = covariance_compressed(Ht, Vt_grid, (i, j), scope, sigma, ledger)
            T, _ = woodbury_inverse_apply(Qt, sigma, ledger)
            Wt = filter_compressed(Qt, Ht[i, i, j], Vt_grid[i, j], sigma, T, ledger)
            signal[i, j], sinr[i, j] = sinr_compressed(Wt, Qt, Ht[i, i, j], Vt_grid[i, j], ledger)
    return SinrReport("compressed", signal, sinr, ledger, time.perf_counter() - start)
