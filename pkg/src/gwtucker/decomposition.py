"""
Tucker compression of channel-tensor grids.

Three models share one objective, the total squared residual

    f = sum_{k,[i,j]} || X^{[i,j]}_k - G x_1 A x_2 B x_3 C ||_F^2,

and differ only in which factor matrices are tied together:

* ``individual``: every link owns its A, B and C.
* ``groupwise``: A is shared by all links into user [i,j] (one per user),
  B by all links out of base k (one per base); C is per link.
* ``shared``: a single A and a single B for the whole system.

With orthonormal factors the optimal core is the projection
``G = X x_1 A^* x_2 B^* x_3 C^*`` and ``f = sum ||X||^2 - g`` with
``g = sum ||G||^2``. Each factor update maximises ``g`` over one block by
taking the leading eigenvectors of an accumulated Hermitian Gram matrix.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .tensor_core import DimensionError, as_tensor3, matricize, mode_product

__all__ = [
    "CompressionRanks",
    "TuckerFactors",
    "GroupwiseFactorSet",
    "SolveTrace",
    "MODELS",
    "phase_normalize",
    "leading_eigvecs",
    "hosvd",
    "hooi_individual",
    "groupwise_init",
    "shared_init",
    "update_factor_A",
    "update_factor_B",
    "update_factor_C",
    "compute_cores",
    "objective",
    "groupwise_solve",
    "shared_solve",
    "individual_solve",
    "reconstruct",
    "solve",
]

MODELS = ("individual", "shared", "groupwise")

DEFAULT_ITERS = 20
# sweep-over-sweep decrease below this fraction of sum ||X||^2 ends the solve
EARLY_STOP_RTOL = 1e-10


@dataclass(frozen=True)
class CompressionRanks:
    m: int
    n: int
    p: int

    def __post_init__(self):
        for name in ("m", "n", "p"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"rank {name} must be a positive integer, got {v!r}")

    @classmethod
    def coerce(cls, ranks) -> "CompressionRanks":
        if isinstance(ranks, cls):
            return ranks
        m, n, p = ranks
        return cls(int(m), int(n), int(p))

    def check(self, M, N, P):
        for r, d, name in ((self.m, M, "m"), (self.n, N, "n"), (self.p, P, "p")):
            if r > d:
                raise DimensionError(f"rank {name}={r} exceeds the dimension {d} it compresses")

    def as_tuple(self):
        return (self.m, self.n, self.p)


@dataclass
class TuckerFactors:
    """Orthonormal factors A (M x m), B (N x n), C (P x p) and core G (m, n, p)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    G: np.ndarray

    @property
    def ranks(self) -> CompressionRanks:
        return CompressionRanks(*self.G.shape)


@dataclass
class SolveTrace:
    """
    Objective history of an alternating solve.

    ``objective_per_iter[0]`` is the value at the initial point and entry
    ``s`` the value after sweep ``s``; ``gain_per_iter`` holds the matching
    ``g`` values. ``energy`` is ``sum ||X||^2``.
    """

    objective_per_iter: List[float] = field(default_factory=list)
    gain_per_iter: List[float] = field(default_factory=list)
    energy: float = 0.0

    @property
    def iterations_run(self) -> int:
        return max(len(self.objective_per_iter) - 1, 0)

    @property
    def final(self) -> float:
        return self.objective_per_iter[-1]


@dataclass
class GroupwiseFactorSet:
    """
    Factors for a whole ``(J, K)`` channel grid.

    Shapes depend on `model`:

    ============  ================  ===============  =================
    model         A                 B                C / G
    ============  ================  ===============  =================
    groupwise     (J, K, M, m)      (J, N, n)        (J, J, K, ...)
    shared        (M, m)            (N, n)           (J, J, K, ...)
    individual    (J, J, K, M, m)   (J, J, K, N, n)  (J, J, K, ...)
    ============  ================  ===============  =================

    Link grids (C, G) are indexed ``[k, i, j]``, the user grid of A by
    ``[i, j]`` and the base grid of B by ``[k]``.
    """

    model: str
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    G: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")

    @property
    def grid(self):
        J, J2, K = self.C.shape[:3]
        return J, K

    def A_of(self, k, i, j) -> np.ndarray:
        if self.model == "groupwise":
            return self.A[i, j]
        if self.model == "shared":
            return self.A
        return self.A[k, i, j]

    def B_of(self, k, i, j) -> np.ndarray:
        if self.model == "groupwise":
            return self.B[k]
        if self.model == "shared":
            return self.B
        return self.B[k, i, j]

    def link_A(self) -> np.ndarray:
        """A broadcast to the link grid, shape (J, J, K, M, m)."""
        J, K = self.grid
        if self.model == "groupwise":
            return np.broadcast_to(self.A[None], (J,) + self.A.shape)
        if self.model == "shared":
            return np.broadcast_to(self.A, (J, J, K) + self.A.shape)
        return self.A

    def link_B(self) -> np.ndarray:
        """B broadcast to the link grid, shape (J, J, K, N, n)."""
        J, K = self.grid
        if self.model == "groupwise":
            return np.broadcast_to(self.B[:, None, None], (J, J, K) + self.B.shape[1:])
        if self.model == "shared":
            return np.broadcast_to(self.B, (J, J, K) + self.B.shape)
        return self.B

    def link(self, k, i, j) -> TuckerFactors:
        G = None if self.G is None else self.G[k, i, j]
        return TuckerFactors(self.A_of(k, i, j), self.B_of(k, i, j), self.C[k, i, j], G)

    def user_factors(self) -> np.ndarray:
        """Per-user A grid (J, K, M, m); only defined when A is per user or shared."""
        J, K = self.grid
        if self.model == "groupwise":
            return self.A
        if self.model == "shared":
            return np.broadcast_to(self.A, (J, K) + self.A.shape)
        raise ValueError("individual factors have no per-user A")

    def base_factors(self) -> np.ndarray:
        """Per-base B grid (J, N, n); only defined when B is per base or shared."""
        J, K = self.grid
        if self.model == "groupwise":
            return self.B
        if self.model == "shared":
            return np.broadcast_to(self.B, (J,) + self.B.shape)
        raise ValueError("individual factors have no per-base B")

    def as_groupwise(self) -> "GroupwiseFactorSet":
        """Embed shared factors into the groupwise layout (copies A and B out)."""
        if self.model == "groupwise":
            return GroupwiseFactorSet("groupwise", self.A.copy(), self.B.copy(),
                                      self.C.copy(), None if self.G is None else self.G.copy())
        if self.model == "shared":
            return GroupwiseFactorSet(
                "groupwise", np.array(self.user_factors()), np.array(self.base_factors()),
                self.C.copy(), None if self.G is None else self.G.copy())
        raise ValueError("individual factors cannot be expressed groupwise")

    @property
    def ranks(self) -> CompressionRanks:
        return CompressionRanks(self.A.shape[-1], self.B.shape[-1], self.C.shape[-1])


# --- small linear-algebra helpers -----------------------------------------

def phase_normalize(V: np.ndarray) -> np.ndarray:
    """
    Rotate each column by a unit complex factor so its largest-magnitude
    entry is real and nonnegative (first index wins ties).
    """
    V = np.array(V, dtype=np.complex128, copy=True)
    if V.shape[-1] == 0:
        return V
    idx = np.argmax(np.abs(V), axis=-2)
    pivots = np.take_along_axis(V, idx[..., None, :], axis=-2)
    mag = np.abs(pivots)
    phase = np.where(mag > 0, np.conj(pivots) / np.where(mag > 0, mag, 1.0), 1.0)
    return V * phase


def leading_eigvecs(S: np.ndarray, r: int) -> np.ndarray:
    """`r` eigenvectors of Hermitian `S` for the largest eigenvalues, descending."""
    S = 0.5 * (S + np.conj(np.swapaxes(S, -1, -2)))
    _, V = np.linalg.eigh(S)
    return phase_normalize(V[..., ::-1][..., :r])


def _leading_left_singular(Xn: np.ndarray, r: int) -> np.ndarray:
    U, _, _ = np.linalg.svd(Xn, full_matrices=False)
    if U.shape[1] < r:
        # wide-but-short unfolding: complete the basis from the full SVD
        U, _, _ = np.linalg.svd(Xn, full_matrices=True)
    return phase_normalize(U[:, :r])


def _project(X, A, B, C):
    """Core ``X x_1 A^* x_2 B^* x_3 C^*`` via the unfolding definition."""
    Y = mode_product(X, np.conj(A.T), 1)
    Y = mode_product(Y, np.conj(B.T), 2)
    return mode_product(Y, np.conj(C.T), 3)


def _expand(G, A, B, C):
    Y = mode_product(G, A, 1)
    Y = mode_product(Y, B, 2)
    return mode_product(Y, C, 3)


def reconstruct(factors: TuckerFactors) -> np.ndarray:
    """Rank-(m, n, p) approximation ``G x_1 A x_2 B x_3 C`` of one link."""
    return _expand(factors.G, factors.A, factors.B, factors.C)


# --- single tensor ----------------------------------------------------------

def hosvd(X, ranks) -> TuckerFactors:
    """
    Truncated higher-order SVD.

    Each factor holds the leading left singular vectors of the matching
    unfolding; the core is the projection of `X` onto them.
    """
    X = as_tensor3(X)
    ranks = CompressionRanks.coerce(ranks)
    ranks.check(*X.shape)
    A = _leading_left_singular(matricize(X, 1), ranks.m)
    B = _leading_left_singular(matricize(X, 2), ranks.n)
    C = _leading_left_singular(matricize(X, 3), ranks.p)
    return TuckerFactors(A, B, C, _project(X, A, B, C))


def _residual_sq(X, factors):
    R = X - reconstruct(factors)
    return float(np.real(np.vdot(R, R)))


def hooi_individual(X, ranks, iters: int = DEFAULT_ITERS,
                    init: Optional[TuckerFactors] = None):
    """
    Higher-order orthogonal iteration on a single tensor.

    Starts from `init` (HOSVD when omitted) and runs up to `iters` sweeps of
    A, B, C eigen-updates. ``iters=0`` returns the starting point with its
    optimal core.

    Returns
    -------
    (TuckerFactors, SolveTrace)
    """
    X = as_tensor3(X)
    ranks = CompressionRanks.coerce(ranks)
    ranks.check(*X.shape)
    if iters < 0:
        raise ValueError("iters must be non-negative")
    if init is None:
        cur = hosvd(X, ranks)
    else:
        cur = TuckerFactors(init.A, init.B, init.C, None)
        cur.G = _project(X, cur.A, cur.B, cur.C)
    energy = float(np.real(np.vdot(X, X)))
    trace = SolveTrace(energy=energy)
    trace.objective_per_iter.append(_residual_sq(X, cur))
    trace.gain_per_iter.append(float(np.real(np.vdot(cur.G, cur.G))))

    A, B, C = cur.A, cur.B, cur.C
    for _ in range(iters):
        M1 = matricize(mode_product(mode_product(X, np.conj(B.T), 2), np.conj(C.T), 3), 1)
        A = leading_eigvecs(M1 @ np.conj(M1.T), ranks.m)
        M2 = matricize(mode_product(mode_product(X, np.conj(A.T), 1), np.conj(C.T), 3), 2)
        B = leading_eigvecs(M2 @ np.conj(M2.T), ranks.n)
        M3 = matricize(mode_product(mode_product(X, np.conj(A.T), 1), np.conj(B.T), 2), 3)
        C = leading_eigvecs(M3 @ np.conj(M3.T), ranks.p)
        cur = TuckerFactors(A, B, C, _project(X, A, B, C))
        trace.objective_per_iter.append(_residual_sq(X, cur))
        trace.gain_per_iter.append(float(np.real(np.vdot(cur.G, cur.G))))
        if trace.objective_per_iter[-2] - trace.objective_per_iter[-1] < EARLY_STOP_RTOL * energy:
            break
    return cur, trace


# --- grid kernels -----------------------------------------------------------

def _tensors(channels) -> np.ndarray:
    X = getattr(channels, "tensors", channels)
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 6 or X.shape[0] != X.shape[1]:
        raise DimensionError(
            f"channel grid must have shape (J, J, K, M, N, P), got {X.shape}")
    return X


def _gram1(X, B, C):
    """``1M 1M^*`` for ``1M = (X x_2 B^* x_3 C^*)_(1)``; leading axes batch."""
    Y = np.einsum("...abc,...bq,...cr->...aqr", X, np.conj(B), np.conj(C))
    return np.einsum("...aqr,...bqr->...ab", Y, np.conj(Y))


def _gram2(X, A, C):
    Y = np.einsum("...abc,...aq,...cr->...bqr", X, np.conj(A), np.conj(C))
    return np.einsum("...bqr,...dqr->...bd", Y, np.conj(Y))


def _gram3(X, A, B):
    Y = np.einsum("...abc,...aq,...br->...cqr", X, np.conj(A), np.conj(B))
    return np.einsum("...cqr,...dqr->...cd", Y, np.conj(Y))


def update_factor_A(channels, factors: GroupwiseFactorSet, user) -> np.ndarray:
    """
    Best A for user ``[i, j]`` with every B and C fixed.

    Accumulates ``sum_k 1M 1M^*`` over the J links into the user and returns
    its `m` leading eigenvectors.
    """
    X = _tensors(channels)
    i, j = user
    J = X.shape[0]
    m = factors.A.shape[-1]
    S = np.zeros((X.shape[3], X.shape[3]), dtype=np.complex128)
    for k in range(J):
        S += _gram1(X[k, i, j], factors.B_of(k, i, j), factors.C[k, i, j])
    return leading_eigvecs(S, m)


def update_factor_B(channels, factors: GroupwiseFactorSet, base) -> np.ndarray:
    """Best B for base `k`: leading eigenvectors of ``sum_[i,j] 2M 2M^*``."""
    X = _tensors(channels)
    k = base
    J, _, K = X.shape[:3]
    n = factors.B.shape[-1]
    S = np.zeros((X.shape[4], X.shape[4]), dtype=np.complex128)
    for i in range(J):
        for j in range(K):
            S += _gram2(X[k, i, j], factors.A_of(k, i, j), factors.C[k, i, j])
    return leading_eigvecs(S, n)


def update_factor_C(channels, factors: GroupwiseFactorSet, link) -> np.ndarray:
    """Best C for link ``(k, [i, j])``; no accumulation across links."""
    X = _tensors(channels)
    k, i, j = link
    S = _gram3(X[k, i, j], factors.A_of(k, i, j), factors.B_of(k, i, j))
    return leading_eigvecs(S, factors.C.shape[-1])


def compute_cores(channels, factors: GroupwiseFactorSet) -> np.ndarray:
    """Optimal core grid ``X x_1 A^* x_2 B^* x_3 C^*``, shape (J, J, K, m, n, p)."""
    X = _tensors(channels)
    return np.einsum("...abc,...aq,...br,...cs->...qrs", X,
                     np.conj(factors.link_A()), np.conj(factors.link_B()),
                     np.conj(factors.C))


def _reconstruct_grid(factors, G):
    return np.einsum("...qrs,...aq,...br,...cs->...abc", G,
                     factors.link_A(), factors.link_B(), factors.C)


def objective(channels, factors: GroupwiseFactorSet, G=None):
    """
    Return ``(f, g)``: the total residual computed from the reconstruction
    and the total retained energy ``sum ||G||^2``.
    """
    X = _tensors(channels)
    if G is None:
        G = compute_cores(X, factors)
    R = X - _reconstruct_grid(factors, G)
    f = float(np.real(np.vdot(R, R)))
    g = float(np.real(np.vdot(G, G)))
    return f, g


def _ranks_for(X, ranks):
    ranks = CompressionRanks.coerce(ranks)
    ranks.check(*X.shape[3:])
    return ranks


def _init_C(X, p):
    """Per-link C from the link's own mode-3 unfolding."""
    J, _, K = X.shape[:3]
    C = np.empty((J, J, K, X.shape[5], p), dtype=np.complex128)
    for k in range(J):
        for i in range(J):
            for j in range(K):
                X3 = matricize(X[k, i, j], 3)
                C[k, i, j] = leading_eigvecs(X3 @ np.conj(X3.T), p)
    return C


def groupwise_init(channels, ranks) -> GroupwiseFactorSet:
    """
    HOSVD-style start: each A from ``sum_k X_(1) X_(1)^*`` over the user's
    links, each B from ``sum_[i,j] X_(2) X_(2)^*`` over the base's links, and
    each C from the link's own mode-3 unfolding.
    """
    X = _tensors(channels)
    r = _ranks_for(X, ranks)
    J, _, K, M, N, P = X.shape
    X1 = X.reshape(J, J, K, M, N * P, order="F")
    S1 = np.einsum("kijab,kijcb->ijac", X1, np.conj(X1))
    A = leading_eigvecs(S1, r.m)
    X2 = np.swapaxes(X, 3, 4).reshape(J, J, K, N, M * P, order="F")
    S2 = np.einsum("kijab,kijcb->kac", X2, np.conj(X2))
    B = leading_eigvecs(S2, r.n)
    return GroupwiseFactorSet("groupwise", A, B, _init_C(X, r.p))


def shared_init(channels, ranks) -> GroupwiseFactorSet:
    X = _tensors(channels)
    r = _ranks_for(X, ranks)
    J, _, K, M, N, P = X.shape
    X1 = X.reshape(J, J, K, M, N * P, order="F")
    A = leading_eigvecs(np.einsum("kijab,kijcb->ac", X1, np.conj(X1)), r.m)
    X2 = np.swapaxes(X, 3, 4).reshape(J, J, K, N, M * P, order="F")
    B = leading_eigvecs(np.einsum("kijab,kijcb->ac", X2, np.conj(X2)), r.n)
    return GroupwiseFactorSet("shared", A, B, _init_C(X, r.p))


def _update_all_C(X, factors):
    J, _, K = X.shape[:3]
    for k in range(J):
        for i in range(J):
            for j in range(K):
                factors.C[k, i, j] = update_factor_C(X, factors, (k, i, j))


def _alternate(X, factors, iters, update_AB):
    energy = float(np.real(np.vdot(X, X)))
    trace = SolveTrace(energy=energy)
    f, g = objective(X, factors)
    trace.objective_per_iter.append(f)
    trace.gain_per_iter.append(g)
    for _ in range(iters):
        update_AB(X, factors)
        _update_all_C(X, factors)
        f, g = objective(X, factors)
        trace.objective_per_iter.append(f)
        trace.gain_per_iter.append(g)
        if trace.objective_per_iter[-2] - f < EARLY_STOP_RTOL * energy:
            break
    factors.G = compute_cores(X, factors)
    return factors, trace


def _groupwise_sweep(X, factors):
    J, _, K = X.shape[:3]
    # all A-updates first, then all B-updates (Gauss-Seidel phase order)
    new_A = [[update_factor_A(X, factors, (i, j)) for j in range(K)] for i in range(J)]
    for i in range(J):
        for j in range(K):
            factors.A[i, j] = new_A[i][j]
    new_B = [update_factor_B(X, factors, k) for k in range(J)]
    for k in range(J):
        factors.B[k] = new_B[k]


def _shared_sweep(X, factors):
    S1 = _gram1(X, factors.link_B(), factors.C).sum(axis=(0, 1, 2))
    factors.A = leading_eigvecs(S1, factors.A.shape[-1])
    S2 = _gram2(X, factors.link_A(), factors.C).sum(axis=(0, 1, 2))
    factors.B = leading_eigvecs(S2, factors.B.shape[-1])


def groupwise_solve(channels, ranks, iters: int = DEFAULT_ITERS,
                    init: Optional[GroupwiseFactorSet] = None):
    """
    Alternating solver for the groupwise model.

    Each sweep updates every per-user A, then every per-base B, then every
    per-link C; cores are formed once at the end. `init` may be a groupwise
    or shared factor set (shared factors are copied out to every user/base).

    Returns
    -------
    (GroupwiseFactorSet, SolveTrace)
    """
    X = _tensors(channels)
    r = _ranks_for(X, ranks)
    if iters < 0:
        raise ValueError("iters must be non-negative")
    factors = groupwise_init(X, r) if init is None else init.as_groupwise()
    if factors.ranks != r:
        raise DimensionError(f"init ranks {factors.ranks} differ from requested {r}")
    return _alternate(X, factors, iters, _groupwise_sweep)


def shared_solve(channels, ranks, iters: int = DEFAULT_ITERS,
                 init: Optional[GroupwiseFactorSet] = None):
    """Alternating solver with one A and one B for every link."""
    X = _tensors(channels)
    r = _ranks_for(X, ranks)
    if iters < 0:
        raise ValueError("iters must be non-negative")
    if init is None:
        factors = shared_init(X, r)
    else:
        if init.model != "shared":
            raise ValueError("shared_solve can only warm-start from shared factors")
        factors = GroupwiseFactorSet("shared", init.A.copy(), init.B.copy(), init.C.copy())
    return _alternate(X, factors, iters, _shared_sweep)


def individual_solve(channels, ranks, iters: int = DEFAULT_ITERS,
                     init: Optional[GroupwiseFactorSet] = None):
    """
    Independent HOOI on every link.

    With `init` given, each link starts from ``init.link(k, i, j)`` instead of
    its own HOSVD. The returned trace sums the per-link objectives sweep by
    sweep (links that stopped early contribute their final value).
    """
    X = _tensors(channels)
    r = _ranks_for(X, ranks)
    J, _, K, M, N, P = X.shape
    A = np.empty((J, J, K, M, r.m), dtype=np.complex128)
    B = np.empty((J, J, K, N, r.n), dtype=np.complex128)
    C = np.empty((J, J, K, P, r.p), dtype=np.complex128)
    G = np.empty((J, J, K, r.m, r.n, r.p), dtype=np.complex128)
    traces = []
    for k in range(J):
        for i in range(J):
            for j in range(K):
                start = None if init is None else init.link(k, i, j)
                tf, tr = hooi_individual(X[k, i, j], r, iters, init=start)
                A[k, i, j], B[k, i, j], C[k, i, j], G[k, i, j] = tf.A, tf.B, tf.C, tf.G
                traces.append(tr)
    length = max(len(t.objective_per_iter) for t in traces)

    def padded(values):
        return np.array(values + [values[-1]] * (length - len(values)))

    trace = SolveTrace(
        objective_per_iter=list(np.sum([padded(t.objective_per_iter) for t in traces], axis=0)),
        gain_per_iter=list(np.sum([padded(t.gain_per_iter) for t in traces], axis=0)),
        energy=float(sum(t.energy for t in traces)),
    )
    return GroupwiseFactorSet("individual", A, B, C, G), trace


def solve(model: str, channels, ranks, iters: int = DEFAULT_ITERS, init=None):
    """Dispatch to the solver for `model`."""
    solvers = {"groupwise": groupwise_solve, "shared": shared_solve,
               "individual": individual_solve}
    if model not in solvers:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return solvers[model](channels, ranks, iters, init=init)
