"""Dual-grid selection of the regularization parameter for image deblurring."""

__version__ = "0.1.0"

from .errors import DimensionError, DualGridError, ParameterError
from .imaging import (
    add_gaussian_noise,
    convolve_periodic,
    delta_psf,
    embed_stencil,
    shift_image,
    shift_kernel,
    shifted_psf,
)
from .metrics import SsimParams, psnr, ssim
from .phantom import SceneSpec, Shape, disc_psf, reference_scene, render_scene, simulate_measurement
from .select import (
    AlphaGrid,
    Regularizer,
    SelectionReport,
    SweepCurve,
    compare_methods,
    discrepancy_select,
    dual_grid_curve,
    dual_grid_select,
    estimate_noise,
    residual_curve,
    shift_similarity,
)
from .solvers import TikhonovSettings, TvSettings, tikhonov_deblur, tv_deblur, tv_objective
