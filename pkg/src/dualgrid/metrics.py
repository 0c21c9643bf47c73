"""Image similarity (SSIM) and fidelity (PSNR) measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionError, ParameterError

__all__ = ["SsimParams", "gaussian_window", "ssim", "ssim_map", "psnr"]


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ParameterError(f"SSIM window must be odd and >= 3, got {self.window}")
        if not (self.k1 > 0 and self.k2 > 0):
            raise ParameterError("k1 and k2 must be positive")
        if not self.window_sigma > 0:
            raise ParameterError("window_sigma must be positive")
        if not self.dynamic_range > 0:
            raise ParameterError("dynamic_range must be positive")


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-(x**2) / (2 * sigma**2))
    return w / w.sum()


def _blur(x, w):
    # Periodic boundary, consistent with the deconvolution model.
    return correlate1d(correlate1d(x, w, axis=0, mode="wrap"), w, axis=1, mode="wrap")


def ssim_map(a, b, params: SsimParams | None = None) -> np.ndarray:
    """Per-pixel SSIM index with Gaussian-weighted local statistics."""
    params = params or SsimParams()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < params.window:
        raise DimensionError(f"images smaller than the {params.window}-pixel SSIM window")
    w = gaussian_window(params.window, params.window_sigma)
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2

    mu_a = _blur(a, w)
    mu_b = _blur(b, w)
    # Centre before the second moments to keep cancellation small.
    da = a - mu_a.mean()
    db = b - mu_b.mean()
    ma = mu_a - mu_a.mean()
    mb = mu_b - mu_b.mean()
    var_a = _blur(da * da, w) - ma * ma
    var_b = _blur(db * db, w) - mb * mb
    cov = _blur(da * db, w) - ma * mb

    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return lum * cs


def ssim(a, b, params: SsimParams | None = None) -> float:
    """Mean SSIM over all pixels (no border cropping)."""
    return float(ssim_map(a, b, params).mean())


def psnr(a, ref, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    a = np.asarray(a, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if a.shape != ref.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {ref.shape}")
    mse = float(np.mean((a - ref) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)
