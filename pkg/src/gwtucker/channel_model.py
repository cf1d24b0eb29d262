"""
Synthetic multi-cell channel tensors.

Every link ``(k, [i, j])`` (base ``k`` to user ``j`` of cell ``i``) carries an
``M x N x P`` tensor whose frontal slices are one line-of-sight slice
(index 0) followed by ``P - 1`` non-line-of-sight delay taps, and a
coefficient vector ``c`` of length ``P``. The channel matrix at the stored
time point is ``H = X x_3 c^*``.

Grids are stored as stacked arrays indexed ``[k, i, j, ...]``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .flops import FlopLedger
from .tensor_core import DimensionError, contract_mode3

__all__ = [
    "SystemTopology",
    "GenParams",
    "InterferenceScope",
    "ChannelSet",
    "generate_channel_set",
    "assemble_channel_full",
    "assemble_channel_compressed",
    "steering_vector",
]


@dataclass(frozen=True)
class SystemTopology:
    """
    Dimensions of a uniform multi-cell system.

    J cells (one base each), K users per cell, M receive and N transmit
    antennas, P stored submatrices per link, L spatial streams, and noise
    standard deviation `sigma`.
    """

    J: int
    K: int
    M: int
    N: int
    P: int
    L: int = 1
    sigma: float = 0.1

    def __post_init__(self):
        for name in ("J", "K", "M", "N", "P", "L"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.L > min(self.M, self.N):
            raise ValueError(
                f"L={self.L} streams exceed min(M, N)={min(self.M, self.N)}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")

    @property
    def n_links(self) -> int:
        return self.J * self.J * self.K

    @property
    def n_users(self) -> int:
        return self.J * self.K


@dataclass(frozen=True)
class GenParams:
    """
    Knobs of the ray-based generator.

    n_rays_los : rays in the LOS slice (one dominant plus weaker extras).
    n_rays_nlos : rays in every NLOS slice.
    decay : per-tap power ratio of consecutive NLOS slices.
    rician_k : LOS power over total NLOS power.
    coeff_decay : power ratio of consecutive coefficient entries before
        normalisation to unit RMS.
    cross_gain_db : extra power gain of links from a foreign base (k != i).
    angle_spread : standard deviation (rad) of NLOS ray angles around the
        link's fixed scatterer directions; every tap reuses the same
        ``n_rays_nlos`` cluster directions.
    """

    n_rays_los: int = 2
    n_rays_nlos: int = 4
    decay: float = 0.7
    rician_k: float = 10.0
    coeff_decay: float = 0.9
    cross_gain_db: float = -10.0
    angle_spread: float = 0.05

    def __post_init__(self):
        if self.n_rays_los < 1 or self.n_rays_nlos < 1:
            raise ValueError("ray counts must be at least 1")
        if not self.decay > 0 or not self.coeff_decay > 0:
            raise ValueError("decay factors must be positive")
        if self.rician_k < 0:
            raise ValueError("rician_k must be non-negative")
        if self.angle_spread < 0:
            raise ValueError("angle_spread must be non-negative")


class InterferenceScope(str, enum.Enum):
    """
    Which transmissions enter a user's covariance.

    ``FULL`` counts every base/user pair. ``PAPER_EXPERIMENT`` keeps the
    serving transmission plus the first user of every other cell and drops
    intra-cell interference.
    """

    FULL = "full"
    PAPER_EXPERIMENT = "paper_experiment"

    def terms(self, i: int, j: int, J: int, K: int):
        """(k, l) transmissions seen by user [i, j]."""
        if self is InterferenceScope.FULL:
            return [(k, l) for k in range(J) for l in range(K)]
        return [(k, j if k == i else 0) for k in range(J)]


@dataclass
class ChannelSet:
    """
    All link tensors and coefficient vectors of a system.

    tensors : ndarray, shape (J, J, K, M, N, P), indexed [k, i, j]
    coeffs : ndarray, shape (J, J, K, P), indexed [k, i, j]
    """

    topology: SystemTopology
    tensors: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        t = self.topology
        self.tensors = np.asarray(self.tensors, dtype=np.complex128)
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        grid = (t.J, t.J, t.K)
        if self.tensors.shape != grid + (t.M, t.N, t.P):
            raise DimensionError(
                f"tensor grid shape {self.tensors.shape} does not match "
                f"{grid + (t.M, t.N, t.P)}")
        if self.coeffs.shape != grid + (t.P,):
            raise DimensionError(
                f"coefficient grid shape {self.coeffs.shape} does not match "
                f"{grid + (t.P,)}")
        if np.any(np.linalg.norm(self.coeffs, axis=-1) == 0):
            raise ValueError("every coefficient vector must be nonzero")

    @classmethod
    def from_arrays(cls, tensors, coeffs=None, L=1, sigma=0.1):
        """Wrap raw grids, inferring the topology from their shape."""
        tensors = np.asarray(tensors, dtype=np.complex128)
        J, J2, K, M, N, P = tensors.shape
        if J != J2:
            raise DimensionError(f"grid must be square in k and i, got {tensors.shape}")
        if coeffs is None:
            coeffs = np.ones((J, J, K, P), dtype=np.complex128)
        return cls(SystemTopology(J, K, M, N, P, L, sigma), tensors, coeffs)

    def links(self):
        t = self.topology
        for k in range(t.J):
            for i in range(t.J):
                for j in range(t.K):
                    yield k, i, j


def steering_vector(n_antennas: int, angle: float) -> np.ndarray:
    """Half-wavelength ULA response, unit modulus per element."""
    return np.exp(1j * np.pi * np.arange(n_antennas) * np.sin(angle))


def _ray_slice(rng, M, N, theta, phi, dominant):
    n_rays = len(theta)
    gains = (rng.standard_normal(n_rays) + 1j * rng.standard_normal(n_rays)) / np.sqrt(2)
    if dominant and n_rays > 1:
        # first ray carries most of the LOS energy
        gains[0] = 3.0 * np.exp(1j * rng.uniform(0, 2 * np.pi))
    S = np.zeros((M, N), dtype=np.complex128)
    for g, th, ph in zip(gains, theta, phi):
        S += g * np.outer(steering_vector(M, th), np.conj(steering_vector(N, ph)))
    return S


def _slice_powers(P, params):
    if P == 1:
        return np.ones(1)
    nlos = params.decay ** np.arange(1, P)
    nlos = nlos / nlos.sum() / (params.rician_k + 1.0)
    los = params.rician_k / (params.rician_k + 1.0)
    return np.concatenate([[los], nlos])


def _link_rng(seed, k, i, j):
    return np.random.default_rng(np.random.SeedSequence([int(seed), k, i, j]))


def generate_channel_set(topology: SystemTopology, gen_params: GenParams = None,
                         seed: int = 0) -> ChannelSet:
    """
    Draw a reproducible synthetic channel set.

    Each link uses its own generator seeded from ``(seed, k, i, j)``, so the
    result does not depend on the order links are produced in.
    """
    if gen_params is None:
        gen_params = GenParams()
    if not 0 <= int(seed) < 2 ** 64:
        raise ValueError(f"seed must fit in 64 bits, got {seed!r}")
    t = topology
    powers = _slice_powers(t.P, gen_params)
    cross_amp = np.sqrt(10.0 ** (gen_params.cross_gain_db / 10.0))
    coeff_profile = np.sqrt(gen_params.coeff_decay ** np.arange(t.P))

    tensors = np.empty((t.J, t.J, t.K, t.M, t.N, t.P), dtype=np.complex128)
    coeffs = np.empty((t.J, t.J, t.K, t.P), dtype=np.complex128)
    for k in range(t.J):
        for i in range(t.J):
            for j in range(t.K):
                rng = _link_rng(seed, k, i, j)
                amp = 1.0 if k == i else cross_amp
                n_los, n_nlos = gen_params.n_rays_los, gen_params.n_rays_nlos
                los_aoa = rng.uniform(-np.pi / 2, np.pi / 2, n_los)
                los_aod = rng.uniform(-np.pi / 2, np.pi / 2, n_los)
                aoa = rng.uniform(-np.pi / 2, np.pi / 2, n_nlos)
                aod = rng.uniform(-np.pi / 2, np.pi / 2, n_nlos)
                for l in range(t.P):
                    if l == 0:
                        S = _ray_slice(rng, t.M, t.N, los_aoa, los_aod, dominant=True)
                    else:
                        spread = gen_params.angle_spread
                        S = _ray_slice(rng, t.M, t.N,
                                       aoa + spread * rng.standard_normal(n_nlos),
                                       aod + spread * rng.standard_normal(n_nlos),
                                       dominant=False)
                    S *= amp * np.sqrt(powers[l] * t.M * t.N) / np.linalg.norm(S)
                    tensors[k, i, j, :, :, l] = S
                c = (rng.standard_normal(t.P) + 1j * rng.standard_normal(t.P)) * coeff_profile
                coeffs[k, i, j] = c * np.sqrt(t.P) / np.linalg.norm(c)
    return ChannelSet(t, tensors, coeffs)


def assemble_channel_full(X, c, ledger: FlopLedger = None) -> np.ndarray:
    """Channel matrix ``X x_3 c^*`` from an uncompressed link tensor."""
    H = contract_mode3(X, c)
    if ledger is not None:
        M, N, P = np.shape(X)
        ledger.charge("reconstruct", M * N * P)
    return H


def assemble_channel_compressed(G, C, c, ledger: FlopLedger = None) -> np.ndarray:
    """
    Compressed channel matrix ``G x_3 (c^* C)``.

    The row vector ``d = c^* C`` folds the mode-3 factor into the
    coefficients; contracting the core against it yields the ``m x n`` matrix
    that stands in for ``A^* H B``.
    """
    G = np.asarray(G)
    C = np.asarray(C)
    c = np.asarray(c).reshape(-1)
    if G.ndim != 3 or C.ndim != 2:
        raise DimensionError("expected a 3-order core and a matrix factor")
    if C.shape[1] != G.shape[2]:
        raise DimensionError(
            f"mode-3 factor has {C.shape[1]} columns, core has {G.shape[2]} slices")
    if c.shape[0] != C.shape[0]:
        raise DimensionError(
            f"coefficient vector has length {c.shape[0]}, factor has {C.shape[0]} rows")
    d = np.conj(c) @ C
    # contract_mode3 conjugates its vector; feed it conj(d) to apply d itself
    H = contract_mode3(G, np.conj(d))
    if ledger is not None:
        m, n, p = G.shape
        ledger.charge("reconstruct", m * n * p + C.shape[0] * p)
    return H
