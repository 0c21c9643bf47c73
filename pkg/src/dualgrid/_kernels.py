"""Fused per-pixel loops for the primal-dual TV iteration.

Each kernel matches a composition of :func:`dualgrid.solvers.gradient`,
:func:`dualgrid.solvers.divergence` and elementwise numpy operations;
``tests/test_solvers.py`` checks them against those references.
"""

import math

import numba


@numba.njit(cache=True)
def dual_ascent_project(fbar, yx, yy, sigma, alpha):
    """``y <- proj_alpha(y + sigma * grad(fbar))`` in place."""
    n0, n1 = fbar.shape
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            a = yx[i, j] + sigma * (fbar[i, jp] - fbar[i, j])
            b = yy[i, j] + sigma * (fbar[ip, j] - fbar[i, j])
            s = math.sqrt(a * a + b * b) / alpha
            if s > 1.0:
                a /= s
                b /= s
            yx[i, j] = a
            yy[i, j] = b


@numba.njit(cache=True)
def primal_argument(f, yx, yy, tau, out):
    """``out <- f + tau * div(y)``."""
    n0, n1 = f.shape
    for i in range(n0):
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jm = j - 1 if j > 0 else n1 - 1
            out[i, j] = f[i, j] + tau * (yx[i, j] - yx[i, jm] + yy[i, j] - yy[im, j])


@numba.njit(cache=True)
def relax(f_new, f, theta, fbar):
    """``fbar <- f_new + theta * (f_new - f)``; returns ``(||f_new - f||**2, ||f_new||**2)``."""
    n0, n1 = f.shape
    step2 = 0.0
    norm2 = 0.0
    for i in range(n0):
        for j in range(n1):
            d = f_new[i, j] - f[i, j]
            step2 += d * d
            norm2 += f_new[i, j] * f_new[i, j]
            fbar[i, j] = f_new[i, j] + theta * d
    return step2, norm2
