"""
Storage ratio, SINR error and speedup.

Storage is counted in complex double-precision numbers. For ``J`` cells,
``K`` users per cell and ``J^2 K`` links of size ``M x N x P``:

* original:   J^2 K M N P
* groupwise:  J^2 K (m n p + P p) + J K M m + J N n
* shared:     J^2 K (m n p + P p) + M m + N n
* individual: J^2 K (m n p + P p + M m + N n)
"""

import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .decomposition import MODELS, CompressionRanks

__all__ = [
    "StorageModel",
    "ErrorSummary",
    "UndefinedRatioError",
    "storage_counts",
    "sinr_error",
    "speedup",
    "median_runtime",
    "LARGE_SCALE_REFERENCE",
]


class UndefinedRatioError(ZeroDivisionError):
    """A reference SINR of zero makes the relative error undefined."""


@dataclass(frozen=True)
class StorageModel:
    model: str
    original_count: int
    compressed_count: int

    @property
    def ratio(self) -> float:
        return self.original_count / self.compressed_count


@dataclass
class ErrorSummary:
    e_c: float
    per_stream: List[float] = field(default_factory=list)
    R_t: Optional[float] = None
    R_s: Optional[float] = None
    R_t_ledger: Optional[float] = None


def storage_counts(J, K, M, N, P, ranks, model: str = "groupwise") -> StorageModel:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    r = CompressionRanks.coerce(ranks)
    m, n, p = r.m, r.n, r.p
    links = J * J * K
    per_link = m * n * p + P * p
    if model == "groupwise":
        compressed = links * per_link + J * K * M * m + J * N * n
    elif model == "shared":
        compressed = links * per_link + M * m + N * n
    else:
        compressed = links * (per_link + M * m + N * n)
    return StorageModel(model, links * M * N * P, compressed)


def sinr_error(full, compressed) -> ErrorSummary:
    """
    Mean relative SINR error between two reports (or plain arrays).

    Raises
    ------
    UndefinedRatioError
        If any reference SINR is zero.
    """
    ref = np.asarray(getattr(full, "sinr", full), dtype=float)
    approx = np.asarray(getattr(compressed, "sinr", compressed), dtype=float)
    if ref.shape != approx.shape:
        raise ValueError(f"SINR index sets differ: {ref.shape} vs {approx.shape}")
    zero = np.argwhere(ref == 0)
    if zero.size:
        raise UndefinedRatioError(
            f"reference SINR is zero at stream index {tuple(int(v) for v in zero[0])}")
    rel = np.abs(ref - approx) / np.abs(ref)
    per_stream = [float(v) for v in rel.ravel()]
    return ErrorSummary(e_c=float(np.mean(rel)), per_stream=per_stream)


def speedup(t_full: float, t_compressed: float) -> float:
    if not (t_full > 0 and t_compressed > 0):
        raise ValueError(f"timings must be positive, got {t_full!r} and {t_compressed!r}")
    return t_full / t_compressed


def median_runtime(fn: Callable[[], object], repeats: int = 5) -> float:
    """Median wall time of `fn` over `repeats` runs after one discarded warmup."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


# Published large-scale groupwise results, kept for report context only.
LARGE_SCALE_REFERENCE = {
    "dims": {"J": 21, "K": 5, "M": 64, "N": 512, "P": 401},
    "ranks": (60, 230, 150),
    "R_t": 6.1904,
    "R_s": 6.1648,
    "e_c": 0.093929,
}
