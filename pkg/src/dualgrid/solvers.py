"""Regularized deconvolution under the periodic blur model.

Both solvers minimize ``||m - p * f||_F**2 + alpha * R(f)`` with the data term
carrying no factor 1/2, so reported ``alpha`` values are on that scale.

* Tikhonov, ``R(f) = ||f||_F**2``: closed form in the Fourier domain.
* Isotropic total variation, ``R(f) = sum_ij |(grad f)_ij|_2``: first-order
  primal-dual hybrid gradient iterations with the data-term proximal map
  solved exactly by the DFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionError, ParameterError
from .imaging import as_image, as_psf

__all__ = [
    "GRAD_NORM_SQ",
    "TikhonovSettings",
    "TvSettings",
    "TvResult",
    "gradient",
    "divergence",
    "total_variation",
    "tikhonov_deblur",
    "tv_deblur",
    "tv_objective",
    "tv_duality_gap",
]

# Upper bound of ||grad||**2 for periodic forward differences in 2-D.
GRAD_NORM_SQ = 8.0
_DEFAULT_STEP = 1.0 / math.sqrt(GRAD_NORM_SQ)


@dataclass(frozen=True)
class TikhonovSettings:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class TvSettings:
    """Parameters of the primal-dual TV solver.

    ``tol`` bounds the relative change ``||f_k+1 - f_k|| / ||f_k+1||``; set it
    to 0 to always run ``max_iters`` iterations.  The step sizes must satisfy
    ``tau * sigma * 8 <= 1``.
    """

    alpha: float
    max_iters: int = 500
    tol: float = 1e-6
    theta: float = 1.0
    tau: float = _DEFAULT_STEP
    sigma: float = _DEFAULT_STEP

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ParameterError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.tol >= 0:
            raise ParameterError(f"tol must be >= 0, got {self.tol}")
        if not 0 <= self.theta <= 1:
            raise ParameterError(f"theta must lie in [0, 1], got {self.theta}")
        if not (self.tau > 0 and self.sigma > 0):
            raise ParameterError("tau and sigma must be positive")
        if self.tau * self.sigma * GRAD_NORM_SQ > 1 + 1e-12:
            raise ParameterError(
                f"step sizes violate tau*sigma*8 <= 1 (got {self.tau * self.sigma * GRAD_NORM_SQ:.6g})"
            )


@dataclass
class TvResult:
    image: np.ndarray
    converged: bool
    iterations: int
    rel_change: float
    dual: tuple = field(repr=False, default=())


def gradient(f):
    """Forward differences with periodic wrap, returned as ``(dx, dy)``.

    ``dx`` differences along columns (horizontal), ``dy`` along rows.
    """
    f = np.asarray(f, dtype=np.float64)
    dx = np.empty_like(f)
    dy = np.empty_like(f)
    np.subtract(f[:, 1:], f[:, :-1], out=dx[:, :-1])
    np.subtract(f[:, :1], f[:, -1:], out=dx[:, -1:])
    np.subtract(f[1:], f[:-1], out=dy[:-1])
    np.subtract(f[:1], f[-1:], out=dy[-1:])
    return dx, dy


def divergence(g):
    """Negative adjoint of :func:`gradient`: ``<grad f, g> == -<f, div g>``."""
    gx, gy = g
    out = np.empty_like(gx)
    np.subtract(gx[:, 1:], gx[:, :-1], out=out[:, 1:])
    np.subtract(gx[:, :1], gx[:, -1:], out=out[:, :1])
    out[1:] += gy[1:] - gy[:-1]
    out[:1] += gy[:1] - gy[-1:]
    return out


def total_variation(f) -> float:
    dx, dy = gradient(f)
    return float(np.sqrt(dx * dx + dy * dy).sum())


def _check_pair(m, p):
    m = as_image(m, min_size=1, name="measurement")
    p = np.asarray(p, dtype=np.float64)
    if p.shape != m.shape:
        raise DimensionError(f"shape mismatch: measurement {m.shape} vs PSF {p.shape}")
    return m, as_psf(p)


def _alpha(settings):
    if isinstance(settings, (TikhonovSettings, TvSettings)):
        return settings.alpha
    return float(settings)


def tikhonov_deblur(m, p, alpha) -> np.ndarray:
    """Minimizer of ``||m - p * f||**2 + alpha * ||f||**2``.

    Solved per frequency as ``conj(P) M / (|P|**2 + alpha)``.

    Parameters
    ----------
    m : array_like
        Measured image.
    p : array_like
        PSF in FFT-origin layout.
    alpha : float or TikhonovSettings
        Regularization weight, strictly positive.
    """
    alpha = _alpha(alpha)
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    m, p = _check_pair(m, p)
    P = np.fft.rfft2(p)
    F = np.conj(P) * np.fft.rfft2(m) / (P.real**2 + P.imag**2 + alpha)
    return np.fft.irfft2(F, s=m.shape)


def tv_objective(f, m, p, alpha: float) -> float:
    """``||m - p * f||**2 + alpha * TV(f)`` with isotropic TV."""
    f = np.asarray(f, dtype=np.float64)
    m, p = _check_pair(m, p)
    if f.shape != m.shape:
        raise DimensionError(f"shape mismatch: image {f.shape} vs measurement {m.shape}")
    r = np.fft.irfft2(np.fft.rfft2(p) * np.fft.rfft2(f), s=m.shape) - m
    return float(np.sum(r * r)) + alpha * total_variation(f)


def tv_duality_gap(f, dual, m, p, alpha: float) -> float:
    """Primal-dual gap of the TV problem at a feasible pair ``(f, dual)``.

    The Fenchel dual needs ``p`` to be invertible: with ``z = div(dual)`` the
    conjugate of the data term is ``<z, A^-1 m> + ||A^-T z||**2 / 4``.
    ``dual`` is first scaled into the pointwise ``alpha``-ball.
    """
    m, p = _check_pair(m, p)
    yx, yy = (np.asarray(a, dtype=np.float64) for a in dual)
    scale = np.maximum(1.0, np.sqrt(yx * yx + yy * yy) / alpha)
    z = divergence((yx / scale, yy / scale))
    P = np.fft.fft2(p)
    if np.abs(P).min() < 1e-12:
        raise ParameterError("duality gap requires a PSF with no spectral zeros")
    Z = np.fft.fft2(z)
    n2 = m.size
    lin = float(np.real(np.vdot(Z, np.fft.fft2(m) / P))) / n2
    quad = float(np.sum(np.abs(Z / np.conj(P)) ** 2)) / n2
    return tv_objective(f, m, p, alpha) + lin + quad / 4.0


def tv_deblur(m, p, settings) -> TvResult:
    """Approximate minimizer of ``||m - p * f||**2 + alpha * TV(f)``.

    Iterates, with ``K = grad``::

        y  <- proj_alpha(y + sigma * K fbar)
        f+ <- argmin_f ||p * f - m||**2 + ||f - (f + tau * div y)||**2 / (2 tau)
        fbar <- f+ + theta * (f+ - f)

    The projection acts on each pixel's gradient vector.  The primal step
    inverts ``I + 2 tau A^T A`` exactly in the Fourier domain.  Running out of
    iterations is reported through ``TvResult.converged`` and never raised.

    Parameters
    ----------
    m : array_like
        Measured image, used as the starting point.
    p : array_like
        PSF in FFT-origin layout.
    settings : TvSettings or float
        Solver settings; a bare number is taken as ``alpha`` with defaults.
    """
    if not isinstance(settings, TvSettings):
        settings = TvSettings(alpha=float(settings))
    m, p = _check_pair(m, p)
    alpha, tau, sigma, theta = settings.alpha, settings.tau, settings.sigma, settings.theta
    shape = m.shape

    P = np.fft.rfft2(p)
    denom = 1.0 + 2.0 * tau * (P.real**2 + P.imag**2)
    data_rhs = 2.0 * tau * np.conj(P) * np.fft.rfft2(m)

    f = m.copy()
    fbar = m.copy()
    yx = np.zeros(shape)
    yy = np.zeros(shape)
    v = np.empty(shape)
    rel = math.inf
    converged = False
    it = 0
    for it in range(1, settings.max_iters + 1):
        _kernels.dual_ascent_project(fbar, yx, yy, sigma, alpha)
        _kernels.primal_argument(f, yx, yy, tau, v)
        V = np.fft.rfft2(v)
        V += data_rhs
        V /= denom
        f_new = np.fft.irfft2(V, s=shape)
        step2, norm2 = _kernels.relax(f_new, f, theta, fbar)
        rel = math.sqrt(step2) / max(math.sqrt(norm2), 1e-300)
        f = f_new
        if rel < settings.tol:
            converged = True
            break
    return TvResult(image=f, converged=converged, iterations=it, rel_change=rel, dual=(yx, yy))
