"""Dense-matrix plumbing and the numerically safe scalar maps used everywhere else.

Matrices are plain row-major ``numpy`` float64 arrays; binary code matrices are
int8 arrays over {-1, +1}.  All randomness flows through :func:`make_rng`,
which pins the generator algorithm (PCG64) so a given seed reproduces the
same stream on every platform.
"""

from __future__ import annotations

import numpy as np


class NumericError(ArithmeticError):
    """A computation produced non-finite values; callers should abort, not clamp."""


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator. Identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising ValueError otherwise."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with dimension and finiteness checks."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise NumericError("matrix product overflowed to non-finite values")
    return out


def sigmoid(x):
    """Logistic function 1/(1+e^-x), overflow-safe on both tails.

    Negative inputs use the equivalent form e^x/(1+e^x) so the exponent
    argument is never positive.  Scalars in, scalar out.
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    neg = arr < 0
    out[~neg] = 1.0 / (1.0 + np.exp(-arr[~neg]))
    ex = np.exp(arr[neg])
    out[neg] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out


def softplus(x):
    """log(1+e^x) computed as max(x,0) + log1p(e^-|x|), finite for all finite x."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.maximum(arr, 0.0) + np.log1p(np.exp(-np.abs(arr)))
    return float(out) if out.ndim == 0 else out


def sign_matrix(m) -> np.ndarray:
    """Elementwise sign with the zero-to-plus-one convention.

    Entries >= 0 (including -0.0) map to +1, entries < 0 map to -1.
    Returns int8 so code matrices stay cheap to store and compare.
    """
    arr = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("sign_matrix input contains non-finite entries")
    return np.where(arr >= 0, 1, -1).astype(np.int8)
