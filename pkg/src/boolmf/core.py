"""Dense Boolean matrices, the OR-of-ANDs and XOR products, and the
normalized Hamming reconstruction error.

Matrices are plain ``numpy`` arrays of dtype ``uint8`` holding 0/1, one
byte per element, row-major. :func:`as_bool_matrix` validates and freezes
them.
"""
from __future__ import annotations

import numpy as np

from .errors import BoolMFError, DimensionError

__all__ = [
    "as_bool_matrix",
    "boolean_product",
    "xor_product",
    "reconstruction_error",
    "masked_error",
]


def as_bool_matrix(a, copy: bool = True) -> np.ndarray:
    """Return ``a`` as a read-only 2-D ``uint8`` array of zeros and ones."""
    arr = np.array(a) if copy else np.asarray(a)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
    elif arr.size and not np.isin(arr, (0, 1)).all():
        raise BoolMFError("Boolean matrix entries must be 0 or 1")
    # a view, so freezing it never touches the caller's array
    arr = np.ascontiguousarray(arr, dtype=np.uint8).view()
    arr.setflags(write=False)
    return arr


def _inner_counts(X, Y) -> np.ndarray:
    X = as_bool_matrix(X, copy=False)
    Y = as_bool_matrix(Y, copy=False)
    if X.shape[1] != Y.shape[0]:
        raise DimensionError(
            f"inner dimensions differ: X is {X.shape[0]}x{X.shape[1]}, "
            f"Y is {Y.shape[0]}x{Y.shape[1]}"
        )
    # int64 matmul is exact; counts never exceed K
    return X.astype(np.int64) @ Y.astype(np.int64)


def boolean_product(X, Y) -> np.ndarray:
    """``z[m, n] = OR_k (x[m, k] AND y[k, n])``."""
    return as_bool_matrix(_inner_counts(X, Y) > 0, copy=False)


def xor_product(X, Y) -> np.ndarray:
    """``z[m, n] = (sum_k x[m, k] AND y[k, n]) mod 2``."""
    return as_bool_matrix(_inner_counts(X, Y) % 2, copy=False)


def reconstruction_error(Z, Zhat) -> float:
    """Fraction of entries where ``Z`` and ``Zhat`` disagree."""
    Z = as_bool_matrix(Z, copy=False)
    Zhat = as_bool_matrix(Zhat, copy=False)
    if Z.shape != Zhat.shape:
        raise DimensionError(f"shape mismatch: {Z.shape} vs {Zhat.shape}")
    if Z.size == 0:
        return 0.0
    return float(np.count_nonzero(Z != Zhat)) / Z.size


def masked_error(Z, Zhat, mask) -> float:
    """Reconstruction error restricted to the cells where ``mask`` is true.

    Used for held-out evaluation, where ``mask`` marks unobserved cells.
    Returns 0.0 for an empty mask.
    """
    Z = as_bool_matrix(Z, copy=False)
    Zhat = as_bool_matrix(Zhat, copy=False)
    mask = np.asarray(mask, dtype=bool)
    if not (Z.shape == Zhat.shape == mask.shape):
        raise DimensionError(f"shape mismatch: {Z.shape}, {Zhat.shape}, {mask.shape}")
    count = int(mask.sum())
    if count == 0:
        return 0.0
    return float(np.count_nonzero((Z != Zhat) & mask)) / count
