"""Dense symmetric-matrix foundation.

Symmetric matrices are plain ``(d, d)`` float64 numpy arrays. Producers go
through :func:`symmetrize` so that ``A[i, j] == A[j, i]`` holds exactly
(floating-point addition is commutative, so ``(A + A.T) / 2`` is exactly
symmetric). Everything here is a pure function; arrays are never mutated.
"""

from __future__ import annotations

import struct
from typing import NamedTuple

import numpy as np

__all__ = [
    "EigenDecomposition",
    "symmetrize",
    "check_symmetric",
    "eig_sym",
    "min_eigenvalue",
    "max_eigenvalue",
    "is_spd",
    "pinv",
    "fro_norm",
    "op2_norm",
    "inner",
    "l1_off",
    "save_spmx",
    "load_spmx",
    "load_matrix_csv",
    "save_matrix_csv",
]

_SPMX_MAGIC = b"SPMX"
_SPMX_VERSION = 1

DEFAULT_RANK_TOL = 1e-12


class EigenDecomposition(NamedTuple):
    """Spectral factorization ``A = V diag(w) V.T`` with ``w`` ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return ``(A + A.T) / 2`` as a fresh float64 array (exactly symmetric)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError("matrix dimension must be >= 1")
    return (a + a.T) / 2.0


def check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate that ``a`` is square, finite and exactly symmetric."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    if not np.array_equal(a, a.T):
        raise ValueError(f"{name} is not symmetric; pass it through symmetrize() first")
    return a


def eig_sym(a: np.ndarray) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    a : ndarray
        Symmetric ``(d, d)`` matrix with finite entries.

    Returns
    -------
    EigenDecomposition
        Eigenvalues sorted ascending and the matching orthonormal
        eigenvector columns. Deterministic for identical input.
    """
    a = check_symmetric(a)
    w, v = np.linalg.eigh(a)
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def min_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    a = check_symmetric(a)
    return float(np.linalg.eigvalsh(a)[0])


def max_eigenvalue(a: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    a = check_symmetric(a)
    return float(np.linalg.eigvalsh(a)[-1])


def is_spd(a: np.ndarray, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue exceeds ``tol``."""
    return min_eigenvalue(a) > tol


def pinv(a: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse through the symmetric eigendecomposition.

    Eigenvalues with ``|w| > rank_tol * max|w|`` are inverted, the rest are
    zeroed out. For invertible input this is the ordinary inverse.
    """
    w, v = eig_sym(a)
    amax = np.abs(w).max(initial=0.0)
    inv_w = np.zeros_like(w)
    if amax > 0.0:
        keep = np.abs(w) > rank_tol * amax
        inv_w[keep] = 1.0 / w[keep]
    return symmetrize((v * inv_w) @ v.T)


def fro_norm(a: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64), "fro"))


def op2_norm(a: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix (largest eigenvalue magnitude)."""
    a = check_symmetric(a)
    w = np.linalg.eigvalsh(a)
    return float(max(abs(w[0]), abs(w[-1])))


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean (Frobenius) inner product ``sum_ij A_ij B_ij``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def l1_off(a: np.ndarray) -> float:
    """Sum of absolute values over the strict upper triangle."""
    a = np.asarray(a, dtype=np.float64)
    iu = np.triu_indices(a.shape[0], k=1)
    return float(np.abs(a[iu]).sum())


def save_spmx(path, a: np.ndarray) -> None:
    """Write a symmetric matrix in the binary SPMX format.

    Layout (little-endian): magic ``SPMX``, u32 version, u64 d, then
    ``d * d`` float64 values row-major.
    """
    a = check_symmetric(a)
    d = a.shape[0]
    with open(path, "wb") as fh:
        fh.write(_SPMX_MAGIC)
        fh.write(struct.pack("<IQ", _SPMX_VERSION, d))
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_spmx(path) -> np.ndarray:
    """Read a matrix written by :func:`save_spmx`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SPMX_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {_SPMX_MAGIC!r}")
        version, d = struct.unpack("<IQ", fh.read(12))
        if version != _SPMX_VERSION:
            raise ValueError(f"{path}: unsupported SPMX version {version}")
        data = np.frombuffer(fh.read(8 * d * d), dtype="<f8")
        if data.size != d * d:
            raise ValueError(f"{path}: truncated payload")
    return symmetrize(data.reshape(d, d))


def load_matrix_csv(path) -> np.ndarray:
    """Load a square matrix from CSV text (d lines of d comma-separated values)."""
    a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{path}: expected a square matrix, got shape {a.shape}")
    return symmetrize(a)


def save_matrix_csv(path, a: np.ndarray) -> None:
    """Write a matrix as CSV text, one row per line."""
    np.savetxt(path, np.asarray(a, dtype=np.float64), delimiter=",")
