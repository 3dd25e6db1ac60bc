"""Graphical lasso solver returning both covariance and precision factors.

Solves, for a symmetric input Z with positive diagonal and a penalty
``lam >= 0``::

    minimize_{Theta > 0}  -logdet(Theta) + <Z, Theta> + lam * sum_{i != j} |Theta_ij|

by block coordinate descent on the dual variable W = Theta^{-1}: one
row/column at a time, each subproblem a lasso solved by cyclic coordinate
descent. The diagonal is unpenalized, so W_ii == Z_ii exactly. Convergence
is declared on the duality gap ``<Z, Theta> - d + lam * |Theta|_1,off``.

Z does not have to be positive semi-definite. When the sweep drives the
dual iterate out of the SPD cone (a Schur complement hits zero), the solve
restarts on a ridged input ``Z + ridge * I`` and the estimate is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .symmat import check_symmetric, min_eigenvalue, symmetrize

__all__ = [
    "GlassoParams",
    "PrecisionEstimate",
    "glasso",
    "kkt_residual",
    "glasso_objective",
]


@dataclass
class GlassoParams:
    """Penalty and stopping configuration.

    ``tol`` is the duality-gap threshold that declares convergence;
    ``max_outer`` caps full row/column sweeps and ``max_inner`` caps the
    coordinate-descent sweeps inside one column subproblem.
    """

    lam: float
    tol: float = 1e-4
    max_outer: int = 100
    max_inner: int = 1000

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("penalty must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class PrecisionEstimate:
    """Solver output: covariance W, precision Theta and diagnostics."""

    covariance: np.ndarray
    precision: np.ndarray
    iterations: int
    kkt_residual: float
    converged: bool
    ridged: bool = False
    ridge: float = 0.0


class _SweepStall(Exception):
    """Dual iterate left the SPD cone; caller should ridge and retry."""


def _extract_precision(z_diag, w, coefs):
    """Recover Theta from the dual variable and the per-column coefficients."""
    schur = np.diag(w) - np.einsum("ij,ij->j", w, coefs)
    if np.any(schur <= 1e-10 * max(z_diag.max(), 1.0)):
        raise _SweepStall
    theta_diag = 1.0 / schur
    theta = -coefs * theta_diag[None, :]
    np.fill_diagonal(theta, theta_diag)
    return symmetrize(theta)


def _offdiag_abs_sum(a: np.ndarray) -> float:
    return float(np.abs(a).sum() - np.abs(np.diag(a)).sum())


def glasso_objective(z: np.ndarray, theta: np.ndarray, lam: float) -> float:
    """Penalized negative log-likelihood evaluated at a precision matrix."""
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return np.inf
    return float(-logdet + np.sum(z * theta) + lam * _offdiag_abs_sum(theta))


def _solve(z, lam, tol, max_outer, max_inner, warm, on_sweep):
    d = z.shape[0]
    if d == 1:
        w = z.copy()
        theta = np.array([[1.0 / z[0, 0]]])
        return w, theta, np.zeros((1, 1)), 1, True

    z_diag = np.diag(z).copy()
    if warm is None:
        w = z.copy()
        coefs = np.zeros((d, d))
    else:
        w_init, coefs_init = warm
        w = symmetrize(w_init)
        np.fill_diagonal(w, z_diag)
        coefs = coefs_init.copy()

    indices = [np.concatenate([np.arange(j), np.arange(j + 1, d)]) for j in range(d)]
    cd_tol = 1e-2 * tol * max(np.abs(z).max(), 1e-12)

    def _column_pass(update_w: bool, inner_tol: float):
        for j in range(d):
            idx = indices[j]
            w11 = np.ascontiguousarray(w[np.ix_(idx, idx)])
            z12 = np.ascontiguousarray(z[idx, j])
            beta = np.ascontiguousarray(coefs[idx, j])
            resid = w11 @ beta
            _kernels.lasso_cd(w11, z12, beta, resid, lam, inner_tol, max_inner)
            floor = 1e-10 * max(z_diag.max(), 1.0)
            ok = np.isfinite(resid).all()
            if ok:
                with np.errstate(over="ignore", invalid="ignore"):
                    ok = w[j, j] - float(resid @ beta) > floor
            if not ok:
                # A capped inner solve can leave beta transiently violating
                # the Schur bound; only a converged solve distinguishes a
                # genuine loss of definiteness.
                beta = np.zeros_like(beta)
                resid = np.zeros_like(beta)
                _kernels.lasso_cd(w11, z12, beta, resid, lam, floor, 100 * max_inner)
                if not np.isfinite(resid).all():
                    raise _SweepStall
                with np.errstate(over="ignore", invalid="ignore"):
                    schur = w[j, j] - float(resid @ beta)
                if not schur > floor:
                    raise _SweepStall
            if update_w:
                w[idx, j] = resid  # resid == w11 @ beta
                w[j, idx] = resid
            coefs[idx, j] = beta

    def _gap(theta):
        # True duality gap P(theta) - D(w). The logdet terms cannot be
        # dropped here: the column-wise extraction makes the linear part
        # <Z, theta> + lam |theta|_1,off - d vanish identically, so only
        # the full expression measures progress.
        sign_t, logdet_t = np.linalg.slogdet(theta)
        if sign_t <= 0:
            return np.inf
        try:
            chol = np.linalg.cholesky(w)
        except np.linalg.LinAlgError as exc:
            raise _SweepStall from exc
        logdet_w = 2.0 * float(np.log(np.diag(chol)).sum())
        return (
            float(np.sum(z * theta))
            - d
            + lam * _offdiag_abs_sum(theta)
            - logdet_t
            - logdet_w
        )

    polish_tol = 1e-10 * max(np.abs(z).max(), 1e-12)

    def _extract_with_retry():
        try:
            return _extract_precision(z_diag, w, coefs)
        except _SweepStall:
            # Tighten every column against the current W before concluding
            # that the iterate genuinely left the cone.
            _column_pass(update_w=False, inner_tol=polish_tol)
            return _extract_precision(z_diag, w, coefs)

    converged = False
    sweeps = 0
    theta = None
    for _ in range(max_outer):
        sweeps += 1
        _column_pass(update_w=True, inner_tol=cd_tol)
        theta = _extract_with_retry()
        if on_sweep is not None:
            on_sweep(w, theta)
        if _gap(theta) <= tol:
            # Re-solve every column against the frozen W so the extracted
            # Theta is consistent across columns (W @ Theta == I up to the
            # inner tolerance), then confirm the gap on the polished iterate.
            _column_pass(update_w=False, inner_tol=polish_tol)
            theta = _extract_with_retry()
            if _gap(theta) <= tol:
                converged = True
                break
    if not converged and theta is not None:
        _column_pass(update_w=False, inner_tol=polish_tol)
        theta = _extract_with_retry()
    return w, theta, coefs, sweeps, converged


def glasso(
    z,
    params: GlassoParams,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
    on_sweep=None,
) -> PrecisionEstimate:
    """Solve the penalized inverse-covariance problem on input Z.

    Parameters
    ----------
    z : ndarray
        Symmetric matrix with strictly positive diagonal. It does not have
        to be positive semi-definite; indefinite input triggers an automatic
        ridge rescue when the dual sweep stalls.
    params : GlassoParams
    warm_start : (W, coefs) pair, optional
        Internal state from a previous solve on a nearby input.
    on_sweep : callable, optional
        Invoked as ``on_sweep(W, Theta)`` after every full sweep.

    Returns
    -------
    PrecisionEstimate
        With ``covariance @ precision ~= I`` and the KKT residual of the
        solution. ``converged`` is False when ``max_outer`` ran out.
    """
    z = check_symmetric(z)
    if np.any(np.diag(z) <= 0):
        raise ValueError("input matrix must have a strictly positive diagonal")

    ridge = 0.0
    diag_scale = max(float(np.diag(z).max()), 1e-12)
    for attempt in range(6):
        z_eff = z if ridge == 0.0 else z + ridge * np.eye(z.shape[0])
        try:
            w, theta, coefs, sweeps, converged = _solve(
                z_eff, params.lam, params.tol, params.max_outer, params.max_inner,
                warm_start, on_sweep,
            )
            break
        except _SweepStall:
            warm_start = None
            if attempt == 5:
                raise RuntimeError(
                    "graphical lasso could not keep the dual iterate positive "
                    f"definite even with ridge {ridge:g}"
                )
            if ridge == 0.0:
                ridge = max(0.0, -min_eigenvalue(z)) + 1e-6 * diag_scale
            else:
                # escalate decisively; the last rungs dominate the diagonal
                ridge *= 100.0
    est = PrecisionEstimate(
        covariance=w,
        precision=theta,
        iterations=sweeps,
        kkt_residual=kkt_residual(z_eff, w, theta, params.lam),
        converged=converged,
        ridged=ridge > 0.0,
        ridge=ridge,
    )
    est._coefs = coefs  # internal warm-start handle
    return est


def kkt_residual(z, w, theta, lam: float) -> float:
    """Largest stationarity violation of a candidate (W, Theta) pair.

    Checks, entrywise: the unpenalized diagonal ``W_ii == Z_ii``, the box
    constraint ``|W_ij - Z_ij| <= lam`` wherever ``Theta_ij == 0`` and the
    equality ``W_ij - Z_ij == lam * sign(Theta_ij)`` on the support.
    """
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if not (z.shape == w.shape == theta.shape):
        raise ValueError("shape mismatch")
    d = z.shape[0]
    diff = w - z
    res = float(np.abs(np.diag(diff)).max())
    off = ~np.eye(d, dtype=bool)
    zero = off & (theta == 0.0)
    active = off & (theta != 0.0)
    if zero.any():
        res = max(res, float((np.abs(diff[zero]) - lam).max(initial=-np.inf)), 0.0)
    if active.any():
        viol = np.abs(diff[active] - lam * np.sign(theta[active]))
        res = max(res, float(viol.max()))
    return res
