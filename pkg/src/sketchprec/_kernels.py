"""Compiled inner loops.

Everything here is numba-jitted and operates in place on contiguous float64
arrays. The public modules wrap these kernels behind numpy-level APIs; no
contract lives here.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def fwht_rows(a):
    """In-place Walsh-Hadamard transform of every row of a 2-D array.

    Unnormalized Sylvester ordering: H2 = [[1, 1], [1, -1]], H_{2n} built
    recursively. Row length must be a power of two (not re-checked here).
    """
    n = a.shape[1]
    for r in range(a.shape[0]):
        h = 1
        while h < n:
            for s in range(0, n, 2 * h):
                for j in range(s, s + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2
    return a


@njit(cache=True)
def triple_rt_rows(a, s1, s2, s3, scale):
    """Apply B.T to every row of ``a`` in place, B = scale * H D1 H D2 H D3.

    B.T x = scale * D3 H D2 H D1 H x, so the chain runs H, D1, H, D2, H, D3.
    """
    n = a.shape[1]
    for r in range(a.shape[0]):
        h = 1
        while h < n:
            for s in range(0, n, 2 * h):
                for j in range(s, s + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2
        for j in range(n):
            a[r, j] *= s1[j]
        h = 1
        while h < n:
            for s in range(0, n, 2 * h):
                for j in range(s, s + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2
        for j in range(n):
            a[r, j] *= s2[j]
        h = 1
        while h < n:
            for s in range(0, n, 2 * h):
                for j in range(s, s + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2
        for j in range(n):
            a[r, j] *= s3[j] * scale
    return a


@njit(cache=True)
def triple_r_rows(a, s1, s2, s3, scale):
    """Apply B to every row of ``a`` in place, B = scale * H D1 H D2 H D3.

    B x = scale * H D1 H D2 H D3 x, so the chain runs D3, H, D2, H, D1, H.
    """
    n = a.shape[1]
    for r in range(a.shape[0]):
        for j in range(n):
            a[r, j] *= s3[j]
        h = 1
        while h < n:
            for s in range(0, n, 2 * h):
                for j in range(s, s + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2
        for j in range(n):
            a[r, j] *= s2[j]
        h = 1
        while h < n:
            for s in range(0, n, 2 * h):
                for j in range(s, s + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2
        for j in range(n):
            a[r, j] *= s1[j]
        h = 1
        while h < n:
            for s in range(0, n, 2 * h):
                for j in range(s, s + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = u + v
                    a[r, j + h] = u - v
            h *= 2
        for j in range(n):
            a[r, j] *= scale
    return a


@njit(cache=True)
def lasso_cd(w11, z12, beta, resid, lam, tol, max_sweeps):
    """Cyclic coordinate descent for the penalized column subproblem.

    Minimizes 0.5 * b' W11 b - z12' b + lam * |b|_1 in place. ``resid`` must
    enter as W11 @ beta and is maintained incrementally. Returns the number
    of sweeps executed. The stop criterion is the subproblem KKT violation
    (checked before each sweep, so an already-solved warm start exits
    without touching a coordinate): ``tol`` is in the units of z12.
    Divergent iterates (possible when W11 is indefinite and the subproblem
    unbounded) bail out early.
    """
    p = beta.shape[0]
    sweeps = 0
    for _ in range(max_sweeps):
        viol = 0.0
        for k in range(p):
            g = resid[k] - z12[k]
            bk = beta[k]
            if bk > 0.0:
                v = g + lam
            elif bk < 0.0:
                v = g - lam
            else:
                v = (g if g > 0.0 else -g) - lam
                if v < 0.0:
                    v = 0.0
            if v < 0.0:
                v = -v
            if v > viol:
                viol = v
        if viol <= tol or not np.isfinite(viol):
            break
        sweeps += 1
        max_abs = 0.0
        for k in range(p):
            b_old = beta[k]
            u = z12[k] - resid[k] + w11[k, k] * b_old
            if u > lam:
                b_new = (u - lam) / w11[k, k]
            elif u < -lam:
                b_new = (u + lam) / w11[k, k]
            else:
                b_new = 0.0
            diff = b_new - b_old
            if diff != 0.0:
                for i in range(p):
                    resid[i] += diff * w11[i, k]
                beta[k] = b_new
            a = b_new if b_new > 0.0 else -b_new
            if a > max_abs:
                max_abs = a
        if not np.isfinite(max_abs) or max_abs > 1e60:
            break
    return sweeps
