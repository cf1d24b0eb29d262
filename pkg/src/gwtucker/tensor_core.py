"""
Dense complex third-order tensor arithmetic.

Tensors are plain ``numpy`` arrays of shape ``(I1, I2, I3)`` and dtype
``complex128``. Element ``(i1, i2, i3)`` sits at linear position
``i1 + I1*(i2 + I2*i3)`` (mode-1 fastest, i.e. Fortran order), so the
mode-1 unfolding of a Fortran-contiguous tensor is a zero-copy view.

Matrices are 2-D ``complex128`` arrays. Unfoldings follow the convention

    [X_(1)]_{i1, i2 + I2*i3} = X_{i1, i2, i3}

with modes 2 and 3 defined by moving the mode index to the rows and
keeping the remaining indices ordered with the lower mode varying fastest.
"""

import numpy as np

__all__ = [
    "DimensionError",
    "as_tensor3",
    "matricize",
    "dematricize",
    "mode_product",
    "contract_mode3",
    "inner",
    "frobenius_norm",
]


class DimensionError(ValueError):
    """Raised when operand shapes do not agree."""


def _check_mode(mode):
    if mode not in (1, 2, 3):
        raise DimensionError(f"mode must be 1, 2 or 3, got {mode!r}")


def as_tensor3(data) -> np.ndarray:
    """Return `data` as a Fortran-ordered complex128 tensor of order 3."""
    arr = np.asarray(data, dtype=np.complex128)
    if arr.ndim != 3:
        raise DimensionError(f"expected a 3-order tensor, got ndim={arr.ndim}")
    if 0 in arr.shape:
        raise DimensionError(f"tensor dims must be positive, got {arr.shape}")
    return np.asfortranarray(arr)


def matricize(X, mode: int) -> np.ndarray:
    """
    Mode-`mode` unfolding of a 3-order tensor.

    Parameters
    ----------
    X : array_like, shape (I1, I2, I3)
    mode : {1, 2, 3}

    Returns
    -------
    np.ndarray
        Matrix of shape ``(I_mode, prod(other dims))``.
    """
    _check_mode(mode)
    X = np.asarray(X)
    if X.ndim != 3:
        raise DimensionError(f"expected a 3-order tensor, got ndim={X.ndim}")
    moved = np.moveaxis(X, mode - 1, 0)
    return moved.reshape(X.shape[mode - 1], -1, order="F")


def dematricize(Xn, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`matricize` for a tensor of shape `dims`."""
    _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    Xn = np.asarray(Xn)
    rest = [d for ax, d in enumerate(dims) if ax != mode - 1]
    if Xn.shape != (dims[mode - 1], rest[0] * rest[1]):
        raise DimensionError(
            f"mode-{mode} unfolding of {dims} must have shape "
            f"{(dims[mode - 1], rest[0] * rest[1])}, got {Xn.shape}")
    moved = Xn.reshape((dims[mode - 1], *rest), order="F")
    return np.asfortranarray(np.moveaxis(moved, 0, mode - 1))


def mode_product(X, U, mode: int) -> np.ndarray:
    """
    Tensor-times-matrix product ``X x_mode U``.

    Computed through the unfolding identity ``Y_(n) = U X_(n)``.

    Raises
    ------
    DimensionError
        If ``U.shape[1]`` differs from the size of `X` along `mode`.
    """
    _check_mode(mode)
    X = np.asarray(X)
    U = np.asarray(U)
    if U.ndim != 2:
        raise DimensionError(f"mode-{mode} factor must be a matrix, got ndim={U.ndim}")
    if U.shape[1] != X.shape[mode - 1]:
        raise DimensionError(
            f"mode-{mode} product: factor has {U.shape[1]} columns but the "
            f"tensor has size {X.shape[mode - 1]} along mode {mode}")
    dims = list(X.shape)
    dims[mode - 1] = U.shape[0]
    return dematricize(U @ matricize(X, mode), mode, dims)


def contract_mode3(X, c) -> np.ndarray:
    """
    Collapse the third mode against a coefficient vector.

    Returns the ``I1 x I2`` matrix ``sum_l X[:, :, l] * conj(c[l])``, which is
    ``X x_3 c^*`` with the singleton third mode dropped.
    """
    X = np.asarray(X)
    c = np.asarray(c).reshape(-1)
    if X.ndim != 3:
        raise DimensionError(f"expected a 3-order tensor, got ndim={X.ndim}")
    if c.shape[0] != X.shape[2]:
        raise DimensionError(
            f"coefficient vector has length {c.shape[0]}, tensor has "
            f"{X.shape[2]} frontal slices")
    return X @ np.conj(c)


def inner(X, Y) -> complex:
    """Tensor inner product ``sum x * conj(y)``."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise DimensionError(f"inner product of {X.shape} and {Y.shape}")
    return complex(np.vdot(Y, X))


def frobenius_norm(X) -> float:
    X = np.asarray(X)
    return float(np.sqrt(np.real(np.vdot(X, X))))
