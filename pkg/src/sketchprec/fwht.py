"""Fast Walsh-Hadamard transform (unnormalized, Sylvester ordering).

The transform is its own inverse up to the factor d: H @ H = d * I. On
integer-valued float64 input the result is exact because the butterfly only
adds and subtracts representable integers.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

__all__ = ["fwht_inplace", "fwht", "pad_pow2", "next_pow2", "is_pow2"]


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    """Smallest power of two >= n."""
    if n < 1:
        raise ValueError("length must be >= 1")
    p = 1
    while p < n:
        p *= 2
    return p


def fwht_inplace(x: np.ndarray) -> np.ndarray:
    """Transform ``x`` in place along its last axis and return it.

    ``x`` must be a C-contiguous float64 array whose last axis length is a
    power of two. A 1-D array is treated as a single vector; higher
    dimensional input transforms every row independently.
    """
    if not isinstance(x, np.ndarray) or x.dtype != np.float64:
        raise TypeError("fwht_inplace requires a float64 ndarray")
    if not x.flags.c_contiguous:
        raise ValueError("fwht_inplace requires a C-contiguous array")
    n = x.shape[-1]
    if not is_pow2(n):
        raise ValueError(f"length {n} is not a power of two")
    _kernels.fwht_rows(x.reshape(-1, n))
    return x


def fwht(x) -> np.ndarray:
    """Out-of-place transform: returns H @ x without touching the input."""
    buf = np.array(x, dtype=np.float64, order="C", copy=True)
    return fwht_inplace(buf)


def pad_pow2(x) -> np.ndarray:
    """Zero-pad a vector to the next power-of-two length.

    Already power-of-two input is returned as a float64 copy. The caller is
    responsible for remembering the original length.
    """
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("pad_pow2 expects a 1-D vector")
    if v.size == 0:
        raise ValueError("cannot pad an empty vector")
    target = next_pow2(v.size)
    if target == v.size:
        return v.copy()
    out = np.zeros(target, dtype=np.float64)
    out[: v.size] = v
    return out
