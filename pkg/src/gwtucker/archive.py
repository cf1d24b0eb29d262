"""
Binary container for a compressed channel set.

Layout (all integers little-endian)::

    magic     4 bytes   b"GWTK"
    version   uint32
    J K M N P m n p     8 x uint32
    model     uint8     0 individual, 1 shared, 2 groupwise
    payload   complex128 values, each as (real, imag) IEEE-754 binary64 LE

Payload order: A factors, B factors, C factors, cores, coefficient
vectors. Matrices are column-major, cores mode-1 fastest, and grids are
walked k-major, then i, then j (A by [i, j] for groupwise, B by [k]).
The payload holds exactly the storage count of the model plus ``J^2 K P``
coefficients.
"""

import struct

import numpy as np

from .decomposition import GroupwiseFactorSet
from .metrics import storage_counts

__all__ = [
    "MAGIC",
    "VERSION",
    "HEADER_SIZE",
    "ArchiveError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedArchiveError",
    "save_archive",
    "load_archive",
    "payload_count",
]

MAGIC = b"GWTK"
VERSION = 1
_HEADER = struct.Struct("<4sI8IB")
HEADER_SIZE = _HEADER.size
_COMPLEX = np.dtype("<c16")
_MODEL_TAGS = {"individual": 0, "shared": 1, "groupwise": 2}
_TAG_MODELS = {v: k for k, v in _MODEL_TAGS.items()}


class ArchiveError(ValueError):
    """Malformed archive."""


class BadMagicError(ArchiveError):
    pass


class VersionMismatchError(ArchiveError):
    pass


class TruncatedArchiveError(ArchiveError):
    pass


def payload_count(model, J, K, M, N, P, m, n, p) -> int:
    """Number of complex values following the header."""
    counts = storage_counts(J, K, M, N, P, (m, n, p), model)
    return counts.compressed_count + J * J * K * P


def _matrices_to_bytes(arr):
    # column-major per matrix: swap the trailing axes, then walk in C order
    return np.ascontiguousarray(np.swapaxes(arr, -1, -2), dtype=_COMPLEX).tobytes()


def _tensors_to_bytes(arr):
    lead = arr.ndim - 3
    order = tuple(range(lead)) + (lead + 2, lead + 1, lead)
    return np.ascontiguousarray(np.transpose(arr, order), dtype=_COMPLEX).tobytes()


def _shapes(model, J, K, M, N, P, m, n, p):
    if model == "groupwise":
        A, B = (J, K, M, m), (J, N, n)
    elif model == "shared":
        A, B = (M, m), (N, n)
    else:
        A, B = (J, J, K, M, m), (J, J, K, N, n)
    return A, B, (J, J, K, P, p), (J, J, K, m, n, p), (J, J, K, P)


def save_archive(path, factors: GroupwiseFactorSet, coeffs) -> int:
    """Write `factors` and `coeffs` to `path`; returns the byte count written."""
    if factors.G is None:
        raise ValueError("factor set has no cores")
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    J, K = factors.grid
    M, m = factors.A.shape[-2:]
    N, n = factors.B.shape[-2:]
    P, p = factors.C.shape[-2:]
    dims = (J, K, M, N, P, m, n, p)
    expected = _shapes(factors.model, *dims)
    got = (factors.A.shape, factors.B.shape, factors.C.shape, factors.G.shape, coeffs.shape)
    if got != expected:
        raise ValueError(f"inconsistent shapes {got}, expected {expected}")
    blob = b"".join([
        _HEADER.pack(MAGIC, VERSION, *dims, _MODEL_TAGS[factors.model]),
        _matrices_to_bytes(factors.A),
        _matrices_to_bytes(factors.B),
        _matrices_to_bytes(factors.C),
        _tensors_to_bytes(factors.G),
        np.ascontiguousarray(coeffs, dtype=_COMPLEX).tobytes(),
    ])
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def _take(buf, offset, shape):
    count = int(np.prod(shape))
    vals = np.frombuffer(buf, dtype=_COMPLEX, count=count, offset=offset)
    return vals.astype(np.complex128).reshape(shape), offset + count * _COMPLEX.itemsize


def load_archive(path):
    """
    Read an archive written by :func:`save_archive`.

    Returns
    -------
    (GroupwiseFactorSet, coeffs)

    Raises
    ------
    BadMagicError, VersionMismatchError, TruncatedArchiveError, ArchiveError
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) >= 4 and buf[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {buf[:4]!r}")
    if len(buf) < HEADER_SIZE:
        raise TruncatedArchiveError(f"{path}: header needs {HEADER_SIZE} bytes, file has {len(buf)}")
    _, version, *dims, tag = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, reader expects {VERSION}")
    if tag not in _TAG_MODELS:
        raise ArchiveError(f"{path}: unknown model tag {tag}")
    model = _TAG_MODELS[tag]
    need = payload_count(model, *dims) * _COMPLEX.itemsize
    have = len(buf) - HEADER_SIZE
    if have < need:
        raise TruncatedArchiveError(f"{path}: payload has {have} bytes, expected {need}")
    if have > need:
        raise ArchiveError(f"{path}: {have - need} trailing bytes after payload")

    A_shape, B_shape, C_shape, G_shape, c_shape = _shapes(model, *dims)
    off = HEADER_SIZE
    A, off = _take(buf, off, A_shape[:-2] + A_shape[:-3:-1])
    B, off = _take(buf, off, B_shape[:-2] + B_shape[:-3:-1])
    C, off = _take(buf, off, C_shape[:-2] + C_shape[:-3:-1])
    G, off = _take(buf, off, G_shape[:-3] + G_shape[:-4:-1])
    coeffs, off = _take(buf, off, c_shape)
    factors = GroupwiseFactorSet(
        model,
        np.ascontiguousarray(np.swapaxes(A, -1, -2)),
        np.ascontiguousarray(np.swapaxes(B, -1, -2)),
        np.ascontiguousarray(np.swapaxes(C, -1, -2)),
        np.ascontiguousarray(np.transpose(G, tuple(range(G.ndim - 3)) + (G.ndim - 1, G.ndim - 2, G.ndim - 3))),
    )
    return factors, coeffs
