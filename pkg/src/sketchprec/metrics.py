"""Estimation quality scores: relative Frobenius error and edge-recovery F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modelgen import DEFAULT_ZERO_TOL

__all__ = ["SupportScore", "relative_error", "f1_support", "support_edges"]


@dataclass(frozen=True)
class SupportScore:
    tp: int
    fp: int
    fn: int

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        # An edgeless graph recovered as edgeless is perfect agreement.
        return 2 * self.tp / denom if denom > 0 else 1.0


def relative_error(theta_true, theta_est) -> float:
    """``||true - est||_F / ||true||_F``."""
    t = np.asarray(theta_true, dtype=np.float64)
    e = np.asarray(theta_est, dtype=np.float64)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    denom = np.linalg.norm(t)
    if denom == 0.0:
        raise ValueError("reference matrix must be nonzero")
    return float(np.linalg.norm(t - e) / denom)


def support_edges(theta, zero_tol: float = DEFAULT_ZERO_TOL) -> set:
    """Strict upper-triangle entries larger than ``zero_tol`` in magnitude."""
    a = np.asarray(theta, dtype=np.float64)
    iu, ju = np.where(np.triu(np.abs(a) > zero_tol, k=1))
    return set(zip(iu.tolist(), ju.tolist()))


def f1_support(theta_true, theta_est, zero_tol: float = DEFAULT_ZERO_TOL) -> SupportScore:
    """Compare off-diagonal supports; diagonals carry no edge information."""
    t = np.asarray(theta_true, dtype=np.float64)
    e = np.asarray(theta_est, dtype=np.float64)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    true_edges = support_edges(t, zero_tol)
    est_edges = support_edges(e, zero_tol)
    tp = len(true_edges & est_edges)
    return SupportScore(
        tp=tp,
        fp=len(est_edges - true_edges),
        fn=len(true_edges - est_edges),
    )
