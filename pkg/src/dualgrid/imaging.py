"""Discrete periodic measurement model.

Images are square ``float64`` arrays.  Point spread functions (PSFs) share the
image shape and are stored in FFT-origin layout: the kernel centre sits at
index ``(0, 0)`` and negative offsets wrap to the end of each axis.  With that
layout ``ifft2(fft2(p) * fft2(f))`` is the periodic convolution ``p * f`` with
no extra shifting.

The forward DFT is unnormalized and the inverse carries ``1/n**2`` (numpy's
default), so ``sum(x**2) == sum(abs(fft2(x))**2) / n**2``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "MIN_SIZE",
    "FORWARD",
    "BACKWARD",
    "fft2",
    "ifft2",
    "as_image",
    "as_psf",
    "delta_psf",
    "embed_stencil",
    "centered",
    "convolve_periodic",
    "shift_kernel",
    "shift_image",
    "shifted_psf",
    "add_gaussian_noise",
    "noise_field",
]

MIN_SIZE = 8
FORWARD = "forward"
BACKWARD = "backward"

_PSF_SUM_TOL = 1e-12
_PSF_NEG_TOL = 1e-15
_IMAG_TOL = 1e-8

# (row, col) offsets of the four 1/4 taps; rows grow downwards.
_SHIFT_TAPS = {
    FORWARD: ((0, 0), (0, -1), (1, 0), (1, -1)),
    BACKWARD: ((0, 0), (0, 1), (-1, 0), (-1, 1)),
}


def fft2(x):
    return np.fft.fft2(x)


def ifft2(X):
    return np.fft.ifft2(X)


def as_image(f, min_size: int = MIN_SIZE, name: str = "image") -> np.ndarray:
    """Validate ``f`` as a square finite image and return it as float64."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise DimensionError(f"{name} must be a square 2-D array, got shape {f.shape}")
    if f.shape[0] < min_size:
        raise DimensionError(f"{name} must be at least {min_size}x{min_size}, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ParameterError(f"{name} contains non-finite values")
    return f


def as_psf(p, n: int | None = None) -> np.ndarray:
    """Validate a PSF in FFT-origin layout (nonnegative, unit sum)."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionError(f"PSF must be a square 2-D array, got shape {p.shape}")
    if n is not None and p.shape[0] != n:
        raise DimensionError(f"PSF size {p.shape[0]} does not match image size {n}")
    if p.min() < -_PSF_NEG_TOL:
        raise ParameterError("PSF has negative entries")
    if abs(p.sum() - 1.0) > _PSF_SUM_TOL:
        raise ParameterError(f"PSF must sum to 1, got {p.sum()!r}")
    return p


def delta_psf(n: int) -> np.ndarray:
    """Identity kernel: a single 1 at the origin."""
    p = np.zeros((n, n))
    p[0, 0] = 1.0
    return p


def embed_stencil(stencil, n: int) -> np.ndarray:
    """Wrap a centred odd-sized stencil into an ``n x n`` FFT-origin grid.

    The centre entry of ``stencil`` lands at ``(0, 0)``.  Stencils larger than
    the grid are rejected rather than aliased.
    """
    stencil = np.asarray(stencil, dtype=np.float64)
    k0, k1 = stencil.shape
    if k0 % 2 == 0 or k1 % 2 == 0:
        raise DimensionError(f"stencil must have odd sides, got {stencil.shape}")
    if k0 > n or k1 > n:
        raise DimensionError(f"stencil {stencil.shape} does not fit in {n}x{n}")
    out = np.zeros((n, n))
    rows = (np.arange(k0) - k0 // 2) % n
    cols = (np.arange(k1) - k1 // 2) % n
    out[np.ix_(rows, cols)] = stencil
    return out


def centered(p) -> np.ndarray:
    """FFT-origin kernel moved to the array centre, for display."""
    return np.fft.fftshift(p)


def convolve_periodic(f, p) -> np.ndarray:
    """Periodic convolution ``p * f`` computed through the DFT.

    Parameters
    ----------
    f : array_like
        Square image.
    p : array_like
        Kernel of the same shape in FFT-origin layout.  It is not required to
        be a normalized PSF, so the routine also serves to compose kernels.

    Returns
    -------
    numpy.ndarray
        Real part of ``ifft2(fft2(p) * fft2(f))``.
    """
    f = np.asarray(f, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if f.shape != p.shape or f.ndim != 2:
        raise DimensionError(f"shape mismatch: image {f.shape} vs kernel {p.shape}")
    out = ifft2(fft2(p) * fft2(f))
    scale = max(1.0, float(np.abs(f).max()) * float(np.abs(p).sum()))
    resid = float(np.abs(out.imag).max())
    if resid > _IMAG_TOL * scale:
        raise ArithmeticError(f"periodic convolution left imaginary residue {resid:.3g}")
    return np.ascontiguousarray(out.real)


def shift_kernel(direction: str, n: int) -> np.ndarray:
    """Half-pixel shift kernel with four taps of 1/4.

    ``"forward"`` takes the origin, left, down and down-left neighbours;
    ``"backward"`` takes the origin, right, up and up-right neighbours.
    Convolving with one and then the other gives a symmetric 3x3 binomial
    smoother with zero net displacement.
    """
    if direction not in _SHIFT_TAPS:
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if n < 5:
        raise DimensionError(f"shift kernels need n >= 5, got {n}")
    d = np.zeros((n, n))
    for r, c in _SHIFT_TAPS[direction]:
        d[r % n, c % n] = 0.25
    return d


def shift_image(f, direction: str = FORWARD) -> np.ndarray:
    """Half-pixel shifted copy of ``f`` (``f * d_s`` for the forward direction).

    Evaluated as a four-term average of rolled copies, which equals the
    spectral convolution with :func:`shift_kernel` but is exact in the last
    bit for constant images.
    """
    f = np.asarray(f, dtype=np.float64)
    out = np.zeros_like(f)
    for r, c in _SHIFT_TAPS[direction]:
        out += np.roll(f, (r, c), axis=(0, 1))
    return 0.25 * out


def shifted_psf(p) -> np.ndarray:
    """PSF of the shifted grid: ``p`` convolved with the backward shift kernel."""
    p = as_psf(p)
    ps = shift_image(p, BACKWARD)
    # Rolling sums keep nonnegativity; renormalize away the last-bit drift.
    return ps / ps.sum()


def noise_field(shape, seed: int) -> np.ndarray:
    """Standard normal field drawn from a PCG64 generator seeded with ``seed``."""
    if not 0 <= int(seed) < 2**64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    rng = np.random.default_rng(int(seed))
    return rng.standard_normal(shape)


def add_gaussian_noise(f, level: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise whose Frobenius norm is ``level * ||f||``.

    The standard normal draw ``w`` is rescaled as
    ``e = level * ||f|| / ||w|| * w`` so the realized relative noise level is
    exact rather than correct only in expectation.
    """
    if not level >= 0:
        raise ParameterError(f"noise level must be >= 0, got {level}")
    f = np.asarray(f, dtype=np.float64)
    if level == 0:
        return f.copy()
    w = noise_field(f.shape, seed)
    e = (level * np.linalg.norm(f) / np.linalg.norm(w)) * w
    return f + e
