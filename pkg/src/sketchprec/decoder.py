"""Iterative sketch-to-precision decoding.

Starting from an SPD guess, the decoder alternates a gradient step on the
sketch-fidelity term ``f(S) = 0.5 * ||A(S) - s||_2**2`` with a graphical
lasso denoising step::

    S_{t+1/2} = S_t - gamma * A*(A(S_t) - s)
    S_{t+1}   = glasso(S_{t+1/2}, penalty = lam * gamma)

Step sizes can be fixed or chosen automatically from an eigenvalue bound
that keeps the pre-denoising iterate positive definite (``safe_auto``).

Unit conventions
----------------
``lam`` and ``gamma`` here refer to the averaged measurement map
``A(M)_j = a_j' M a_j / m``. Published configurations for this kind of
decoder usually quote step sizes for the raw readings ``a_j' M a_j``
without the ``1/m``; because the gradient then shrinks by ``m**2``, a raw
pair ``(lam_r, gamma_r)`` corresponds to ``(lam_r / m**2, gamma_r * m**2)``
here. Use :func:`raw_units_to_operator` or
:meth:`DecoderConfig.from_raw_units` instead of hand-converting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .glasso import GlassoParams, PrecisionEstimate, glasso
from .sketch import (
    Sketch,
    SketchOperator,
    apply_A,
    apply_adjoint,
    column_norms,
    sigma_max_sq,
)
from .symmat import check_symmetric, symmetrize

__all__ = [
    "SAFE_AUTO",
    "STABLE",
    "DecoderConfig",
    "DecodeResult",
    "decode",
    "safe_step",
    "stable_step",
    "gradient",
    "backprojection_init",
    "raw_units_to_operator",
]

SAFE_AUTO = "safe_auto"
STABLE = "stable"

_SAFE_MARGIN = 0.9
# The eigenvalue bound must track the current iterate: a stale bound taken
# before a large step can exceed the true one and lose definiteness, so it
# is refreshed every iteration (the operator constants stay cached).
_SAFE_REFRESH = 1


def raw_units_to_operator(lam: float, gamma: float, m: int) -> tuple[float, float]:
    """Convert a raw-measurement (lam, gamma) pair to operator units."""
    return lam / float(m) ** 2, gamma * float(m) ** 2


@dataclass
class DecoderConfig:
    """Decoding schedule.

    ``gamma`` is a positive step size in operator units, or one of two
    automatic modes: ``"safe_auto"`` tracks 0.9x the positive-definiteness
    bound of :func:`safe_step` (refreshed at every iteration), while
    ``"stable"`` uses the constant descent-stable step :func:`stable_step`,
    which moves much faster and relies on the pre-denoising spectral clamp
    when an iterate leaves the SPD cone. ``lam_min_hat`` is an optional
    lower bound on the smallest eigenvalue of the sketched covariance; 0
    keeps the safe bound conservative.
    """

    lam: float
    gamma: float | str = SAFE_AUTO
    t_max: int = 100
    init: np.ndarray | None = None  # None: scaled identity matched to the sketch
    lam_min_hat: float = 0.0
    record_trace: bool = False
    # Optional plateau stop; off by default so a run executes exactly t_max
    # denoising steps.
    early_stop: bool = False
    # Mid-stream denoiser calls are deliberately inexact: the outer loop
    # corrects them, and exact solves on transiently stiff iterates would
    # dominate the runtime. The final step is re-solved strictly.
    glasso_tol: float = 1e-3
    glasso_max_outer: int = 2
    glasso_max_inner: int = 8
    final_glasso_tol: float = 1e-6
    final_glasso_max_outer: int = 100
    final_glasso_max_inner: int = 1000

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.lam_min_hat < 0:
            raise ValueError("lam_min_hat must be >= 0")
        if isinstance(self.gamma, str):
            if self.gamma not in (SAFE_AUTO, STABLE):
                raise ValueError(f"unknown gamma mode {self.gamma!r}")
        elif self.gamma <= 0:
            raise ValueError("gamma must be > 0")

    @classmethod
    def from_raw_units(cls, lam: float, gamma, m: int, **kwargs) -> "DecoderConfig":
        """Build a config from raw-measurement (lam, gamma), given m."""
        if isinstance(gamma, str):
            lam_op = lam / float(m) ** 2
            return cls(lam=lam_op, gamma=gamma, **kwargs)
        lam_op, gamma_op = raw_units_to_operator(lam, gamma, m)
        return cls(lam=lam_op, gamma=gamma_op, **kwargs)


@dataclass
class DecodeResult:
    estimate: PrecisionEstimate
    objective_trace: np.ndarray | None
    spd_violations: int
    gamma_used: float
    iterations: int


def safe_step(op: SketchOperator, sigma_t, lam_min_hat: float = 0.0) -> float:
    """Step-size bound keeping the gradient-step iterate positive definite.

    Returns ``math.inf`` when every positive step is safe, i.e. when the
    largest eigenvalue of the iterate is below ``lam_min_hat``. Otherwise::

        m**2 / (max_j ||a_j||**2 * sigma_max(A)**2)
             * lam_min(S_t) / (lam_max(S_t) - lam_min_hat)

    The operator constants are computed once per operator and cached.
    """
    sigma_t = check_symmetric(sigma_t)
    eigs = np.linalg.eigvalsh(sigma_t)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    if lam_min <= 0:
        raise ValueError("safe_step requires a positive definite iterate")
    if lam_max < lam_min_hat:
        return math.inf
    denom = lam_max - lam_min_hat
    if denom <= 0:
        return math.inf
    max_col_sq = float(np.max(column_norms(op)) ** 2)
    smax_sq = sigma_max_sq(op)
    return float(op.m) ** 2 / (max_col_sq * smax_sq) * lam_min / denom


def stable_step(op: SketchOperator) -> float:
    """Descent-stable step size ``m**2 / (max_j ||a_j||**2 * sigma_max(A)**2)``.

    This is an upper bound on the inverse Lipschitz constant of the
    fidelity gradient (tight for structured operators), so gradient steps
    of this size cannot diverge. Unlike :func:`safe_step` it does not
    guarantee the iterate stays positive definite.
    """
    max_col_sq = float(np.max(column_norms(op)) ** 2)
    return float(op.m) ** 2 / (max_col_sq * sigma_max_sq(op))


def gradient(op: SketchOperator, sigma, s: Sketch) -> np.ndarray:
    """Gradient of the sketch-fidelity term: ``A*(A(S) - s)``."""
    return apply_adjoint(op, apply_A(op, sigma) - s.values)


def backprojection_init(op: SketchOperator, s: Sketch, floor_rel: float = 1e-3) -> np.ndarray:
    """Spectrally informed starting point computed from the sketch alone.

    For near-isotropic unit-norm measurement directions,
    ``E[<a a', S> a a'] ~ (2 S + tr(S) I) / (d (d + 2))``, so debiasing the
    adjoint of the sketch gives a rough covariance estimate::

        S_0 ~ (d (d + 2) m A*(s) - tr_hat I) / 2,   tr_hat = d * mean(m s_j)

    The eigenvalues are floored at ``floor_rel`` times the largest one to
    make the result usable as an SPD initial iterate. Starting here instead
    of at a scaled identity skips the slow transient in which the gradient
    flow rebuilds the dominant eigenvectors from scratch.
    """
    d = op.d_orig
    g = apply_adjoint(op, s.values) * op.m
    tr_hat = float(np.mean(s.values) * op.m) * d
    sigma0 = (d * (d + 2) * g - tr_hat * np.eye(d)) / 2.0
    w, v = np.linalg.eigh(sigma0)
    w = np.maximum(w, floor_rel * max(float(w[-1]), 1e-12))
    return symmetrize((v * w) @ v.T)


def _initial_iterate(op: SketchOperator, s: Sketch, cfg: DecoderConfig) -> np.ndarray:
    if cfg.init is not None:
        sigma0 = check_symmetric(cfg.init)
        if sigma0.shape[0] != op.d_orig:
            raise ValueError("explicit init has the wrong dimension")
        return sigma0.copy()
    # Moment-matched scale: m * s_j estimates a_j' Cov a_j, whose average over
    # unit-norm directions tracks tr(Cov) / d.
    c = float(np.mean(s.values) * op.m)
    if not c > 0:
        c = 1.0
    return c * np.eye(op.d_orig)


def decode(op: SketchOperator, s: Sketch, cfg: DecoderConfig) -> DecodeResult:
    """Run the iterative decoder and return covariance/precision estimates.

    The sketch must have been produced by ``op`` (fingerprints are
    checked). The objective trace, when recorded, is the fidelity value at
    each iterate before its gradient step; no monotonicity is guaranteed.
    """
    if s.fingerprint != op.fingerprint or s.d_orig != op.d_orig:
        raise ValueError("sketch does not match the operator (fingerprint mismatch)")

    sigma = _initial_iterate(op, s, cfg)
    trace = [] if cfg.record_trace else None
    spd_violations = 0
    warm = None
    estimate: PrecisionEstimate | None = None

    safe_auto = cfg.gamma == SAFE_AUTO
    if cfg.gamma == STABLE:
        gamma = stable_step(op)
    elif safe_auto:
        gamma = 0.0
    else:
        gamma = float(cfg.gamma)

    f_prev = None
    f_scale = None
    iterations = 0
    for t in range(cfg.t_max):
        if safe_auto and t % _SAFE_REFRESH == 0:
            bound = safe_step(op, sigma, cfg.lam_min_hat)
            if math.isinf(bound):
                # Any positive step preserves definiteness; fall back to the
                # always-finite lam_min_hat = 0 bound for an actual number.
                bound = safe_step(op, sigma, 0.0)
            gamma = _SAFE_MARGIN * bound

        residual = apply_A(op, sigma) - s.values
        f_val = 0.5 * float(residual @ residual)
        if trace is not None:
            trace.append(f_val)
        if cfg.early_stop:
            if f_scale is None:
                f_scale = max(1.0, f_val)
            elif abs(f_val - f_prev) <= 1e-12 * f_scale and estimate is not None:
                break
            f_prev = f_val
        iterations = t + 1
        sigma_half = symmetrize(sigma - gamma * apply_adjoint(op, residual))
        if not np.isfinite(sigma_half).all():
            raise FloatingPointError(
                f"decoder produced a non-finite iterate at t={t} (gamma={gamma:g})"
            )
        sigma_half, clamped = _clamp_spd(sigma_half)

        estimate = glasso(
            sigma_half,
            GlassoParams(
                lam=cfg.lam * gamma,
                tol=cfg.glasso_tol,
                max_outer=cfg.glasso_max_outer,
                max_inner=cfg.glasso_max_inner,
            ),
            warm_start=warm,
        )
        if clamped or estimate.ridged:
            spd_violations += 1
        warm = (estimate.covariance, estimate._coefs)
        sigma = estimate.covariance
        last_denoise = (sigma_half, gamma)

    # Re-solve the final denoising step strictly so the returned support and
    # KKT residual reflect a converged solve rather than the capped budget.
    sigma_half, gamma_last = last_denoise
    estimate = glasso(
        sigma_half,
        GlassoParams(
            lam=cfg.lam * gamma_last,
            tol=cfg.final_glasso_tol,
            max_outer=cfg.final_glasso_max_outer,
            max_inner=cfg.final_glasso_max_inner,
        ),
        warm_start=warm,
    )

    return DecodeResult(
        estimate=estimate,
        objective_trace=None if trace is None else np.asarray(trace),
        spd_violations=spd_violations,
        gamma_used=gamma,
        iterations=iterations,
    )


def _clamp_spd(sigma_half: np.ndarray) -> tuple[np.ndarray, bool]:
    """Project a pre-denoising iterate back onto the SPD cone if needed.

    A Cholesky probe keeps the common (already SPD) case cheap; on failure
    the eigenvalues are floored at a small fraction of the largest one.
    """
    try:
        np.linalg.cholesky(sigma_half)
        return sigma_half, False
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(sigma_half)
    # A tiny floor would hand the denoiser a near-singular input and stall
    # its coordinate sweeps; 1e-3 of the top eigenvalue stays safely below
    # the spectrum of any reasonably conditioned target.
    floor = 1e-3 * max(float(w[-1]), 1e-300)
    if floor <= 0:  # entirely non-positive spectrum
        floor = 1e-8
    w = np.maximum(w, floor)
    return symmetrize((v * w) @ v.T), True
