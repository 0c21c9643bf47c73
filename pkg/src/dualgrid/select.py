"""Choice of the regularization parameter.

The dual-grid rule reconstructs the same measurement twice, once with the
camera-grid PSF ``p`` and once with the half-pixel shifted PSF, and picks the
smallest ``alpha`` whose two reconstructions reach a target SSIM.  The
discrepancy principle is provided as a baseline; it needs a noise estimate
which :func:`estimate_noise` derives from flat image patches.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParameterError
from .imaging import as_image, as_psf, delta_psf, shift_image, shifted_psf
from .metrics import SsimParams, ssim
from .solvers import TvSettings, tikhonov_deblur, tv_deblur

__all__ = [
    "THREADS_ENV",
    "DEFAULT_THRESHOLDS",
    "SELECTED",
    "THRESHOLD_NOT_REACHED",
    "NO_CROSSING",
    "AlphaGrid",
    "Regularizer",
    "SweepCurve",
    "SelectionReport",
    "dual_grid_curve",
    "dual_grid_select",
    "residual_curve",
    "discrepancy_select",
    "compare_methods",
    "estimate_noise",
    "shift_similarity",
]

THREADS_ENV = "DUALGRID_THREADS"
DEFAULT_THRESHOLDS = {"tikhonov": 0.985, "tv": 0.97}
DEFAULT_ALPHA_RANGE = {"tikhonov": (1e-4, 1e2), "tv": (1e-4, 1e1)}

SELECTED = "selected"
THRESHOLD_NOT_REACHED = "threshold-not-reached"
NO_CROSSING = "no-crossing"

CSV_COLUMNS = ("alpha", "value", "converged_f", "converged_g")


def _worker_count(workers=None) -> int:
    if workers is None:
        env = os.environ.get(THREADS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _ordered_map(fn, items, workers=None):
    """Lazy map in input order; parallel when more than one worker is allowed."""
    workers = _worker_count(workers)
    if workers == 1:
        return map(fn, items)
    pool = ThreadPoolExecutor(max_workers=workers)
    results = pool.map(fn, items)
    pool.shutdown(wait=False)
    return results


@dataclass(frozen=True)
class AlphaGrid:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ParameterError("an alpha grid needs at least two values")
        if not all(v > 0 and math.isfinite(v) for v in vals):
            raise ParameterError("alpha grid values must be finite and positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ParameterError("alpha grid must be strictly increasing")

    @classmethod
    def logspace(cls, lo: float, hi: float, count: int = 50) -> "AlphaGrid":
        if not 0 < lo < hi:
            raise ParameterError(f"need 0 < alpha_min < alpha_max, got {lo}, {hi}")
        return cls(tuple(np.logspace(math.log10(lo), math.log10(hi), int(count))))

    @classmethod
    def default(cls, kind: str) -> "AlphaGrid":
        return cls.logspace(*DEFAULT_ALPHA_RANGE[kind], 50)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class Regularizer:
    """Regularizer kind plus the solver options shared by every ``alpha``.

    The TV fields are ignored for Tikhonov.
    """

    kind: str = "tikhonov"
    max_iters: int = 500
    tol: float = 1e-6
    theta: float = 1.0
    tau: float = TvSettings.tau
    sigma: float = TvSettings.sigma

    def __post_init__(self):
        if self.kind not in ("tikhonov", "tv"):
            raise ParameterError(f"regularizer must be 'tikhonov' or 'tv', got {self.kind!r}")
        if self.kind == "tv":
            self.tv_settings(1.0)

    def tv_settings(self, alpha: float) -> TvSettings:
        return TvSettings(alpha=alpha, max_iters=self.max_iters, tol=self.tol,
                          theta=self.theta, tau=self.tau, sigma=self.sigma)

    def solve(self, m, p, alpha: float):
        """Return ``(image, info)``; ``info`` carries convergence diagnostics."""
        if self.kind == "tikhonov":
            return tikhonov_deblur(m, p, alpha), {"converged": True, "iterations": 0, "rel_change": 0.0}
        res = tv_deblur(m, p, self.tv_settings(alpha))
        return res.image, {"converged": res.converged, "iterations": res.iterations,
                           "rel_change": res.rel_change}

    def to_dict(self) -> dict:
        if self.kind == "tikhonov":
            return {"kind": "tikhonov"}
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Regularizer":
        return cls(**d)


@dataclass
class SweepCurve:
    """Values sampled along an alpha grid.

    ``kind`` is one of ``dual_grid_ssim``, ``discrepancy_residual`` or
    ``shift_similarity``.  ``converged_g`` is empty for single-model curves.
    """

    kind: str
    alphas: list
    values: list
    converged_f: list = field(default_factory=list)
    converged_g: list = field(default_factory=list)
    iterations: list = field(default_factory=list)

    def __len__(self):
        return len(self.alphas)

    def rows(self):
        for i, (a, v) in enumerate(zip(self.alphas, self.values)):
            cf = self.converged_f[i] if i < len(self.converged_f) else ""
            cg = self.converged_g[i] if i < len(self.converged_g) else ""
            yield a, v, cf, cg

    def to_csv(self, path, extra: dict | None = None) -> None:
        """Write ``alpha,value,converged_f,converged_g`` plus constant ``extra`` columns."""
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(CSV_COLUMNS) + list(extra))
            for a, v, cf, cg in self.rows():
                w.writerow([repr(float(a)), repr(float(v)), _flag(cf), _flag(cg)]
                           + [repr(float(x)) for x in extra.values()])

    @classmethod
    def from_csv(cls, path, kind: str) -> "SweepCurve":
        alphas, values, cf, cg = [], [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                alphas.append(float(row["alpha"]))
                values.append(float(row["value"]))
                if row["converged_f"]:
                    cf.append(row["converged_f"] == "1")
                if row["converged_g"]:
                    cg.append(row["converged_g"] == "1")
        return cls(kind, alphas, values, cf, cg)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepCurve":
        return cls(**d)


def _flag(v):
    if v == "":
        return ""
    return "1" if v else "0"


@dataclass
class SelectionReport:
    method: str
    status: str
    chosen_alpha: float | None
    target: float
    curve: SweepCurve
    settings: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    reconstruction: np.ndarray | None = field(default=None, repr=False)

    @property
    def selected(self) -> bool:
        return self.status == SELECTED

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "chosen_alpha": self.chosen_alpha,
            "target": self.target,
            "settings": self.settings,
            "diagnostics": self.diagnostics,
            "curve": self.curve.to_dict(),
        }

    def to_json(self, path=None, **extra) -> str:
        text = json.dumps(dict(self.to_dict(), **extra), indent=2, default=_json_default,
                          allow_nan=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionReport":
        return cls(method=d["method"], status=d["status"], chosen_alpha=d["chosen_alpha"],
                   target=d["target"], curve=SweepCurve.from_dict(d["curve"]),
                   settings=d.get("settings", {}), diagnostics=d.get("diagnostics", {}))

    @classmethod
    def from_json(cls, text_or_path) -> "SelectionReport":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text()
        return cls.from_dict(json.loads(text))

    def grid(self) -> AlphaGrid:
        return AlphaGrid(tuple(self.settings["grid"]))

    def regularizer(self) -> Regularizer:
        return Regularizer.from_dict(self.settings["regularizer"])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _prepare(m, p):
    m = as_image(m, name="measurement")
    p = np.asarray(p, dtype=np.float64)
    if p.shape != m.shape:
        raise DimensionError(f"shape mismatch: measurement {m.shape} vs PSF {p.shape}")
    return m, as_psf(p)


class _Sweep:
    """Scan a grid once, feeding the dual-grid and/or discrepancy rules.

    The camera-grid reconstruction is shared by both rules.  In early-exit
    mode the scan is sequential and stops once every requested rule has
    chosen; otherwise every grid point is evaluated, in parallel if allowed.
    """

    def __init__(self, m, p, reg, grid, threshold=None, delta=None, ssim_params=None,
                 early_exit=False, workers=None):
        self.m, self.p = _prepare(m, p)
        self.ps = shifted_psf(self.p)
        self.P = np.fft.rfft2(self.p)
        self.reg = reg
        self.grid = grid
        self.threshold = threshold
        self.delta = delta
        self.ssim_params = ssim_params or SsimParams()
        self.early_exit = early_exit
        self.workers = workers
        self.dual = SweepCurve("dual_grid_ssim", [], []) if threshold is not None else None
        self.disc = SweepCurve("discrepancy_residual", [], []) if delta is not None else None
        self.dual_choice = None
        self.disc_choice = None
        self._prev = None

    def _point(self, alpha, want_dual, want_disc):
        f, info_f = self.reg.solve(self.m, self.p, alpha)
        out = {"alpha": alpha, "f": f, "info_f": info_f}
        if want_dual:
            g, info_g = self.reg.solve(self.m, self.ps, alpha)
            out["ssim"] = ssim(g, f, self.ssim_params)
            out["info_g"] = info_g
        if want_disc:
            r = np.fft.irfft2(self.P * np.fft.rfft2(f), s=self.m.shape) - self.m
            out["psi"] = float(np.linalg.norm(r))
        return out

    def _want(self):
        dual = self.dual is not None and not (self.early_exit and self.dual_choice)
        disc = self.disc is not None and not (self.early_exit and self.disc_choice)
        return dual, disc

    def _consume(self, pt):
        a = pt["alpha"]
        if "ssim" in pt:
            c = self.dual
            c.alphas.append(a)
            c.values.append(pt["ssim"])
            c.converged_f.append(bool(pt["info_f"]["converged"]))
            c.converged_g.append(bool(pt["info_g"]["converged"]))
            c.iterations.append([pt["info_f"]["iterations"], pt["info_g"]["iterations"]])
            if self.dual_choice is None and pt["ssim"] >= self.threshold:
                self.dual_choice = (a, pt["f"])
        if "psi" in pt:
            c = self.disc
            c.alphas.append(a)
            c.values.append(pt["psi"])
            c.converged_f.append(bool(pt["info_f"]["converged"]))
            c.iterations.append([pt["info_f"]["iterations"]])
            cur = (a, pt["psi"] - self.delta, pt["f"])
            if self.disc_choice is None:
                if cur[1] == 0:
                    self.disc_choice = (a, pt["f"])
                elif self._prev is not None and self._prev[1] * cur[1] < 0:
                    best = self._prev if abs(self._prev[1]) <= abs(cur[1]) else cur
                    self.disc_choice = (best[0], best[2])
            self._prev = cur

    def run(self):
        if self.early_exit:
            for alpha in self.grid.values:
                want_dual, want_disc = self._want()
                if not (want_dual or want_disc):
                    break
                self._consume(self._point(alpha, want_dual, want_disc))
        else:
            want_dual, want_disc = self.dual is not None, self.disc is not None
            fn = lambda a: self._point(a, want_dual, want_disc)  # noqa: E731
            for pt in _ordered_map(fn, self.grid.values, self.workers):
                self._consume(pt)
        return self

    def dual_report(self, diagnostics=None) -> SelectionReport:
        c, chosen = self.dual, self.dual_choice
        diag = dict(diagnostics or {})
        diag["nonconverged_alphas"] = [
            a for a, cf, cg in zip(c.alphas, c.converged_f, c.converged_g) if not (cf and cg)
        ]
        return SelectionReport(
            method="dual_grid",
            status=SELECTED if chosen else THRESHOLD_NOT_REACHED,
            chosen_alpha=chosen[0] if chosen else None,
            target=float(self.threshold),
            curve=c,
            settings={"regularizer": self.reg.to_dict(), "grid": list(self.grid.values),
                      "threshold": float(self.threshold), "ssim": asdict(self.ssim_params),
                      "early_exit": bool(self.early_exit)},
            diagnostics=diag,
            reconstruction=chosen[1] if chosen else None,
        )

    def disc_report(self, diagnostics=None) -> SelectionReport:
        c, chosen = self.disc, self.disc_choice
        diag = dict(diagnostics or {})
        diag["nonconverged_alphas"] = [a for a, cf in zip(c.alphas, c.converged_f) if not cf]
        diag["residual_range"] = [min(c.values), max(c.values)]
        return SelectionReport(
            method="discrepancy",
            status=SELECTED if chosen else NO_CROSSING,
            chosen_alpha=chosen[0] if chosen else None,
            target=float(self.delta),
            curve=c,
            settings={"regularizer": self.reg.to_dict(), "grid": list(self.grid.values),
                      "delta": float(self.delta), "early_exit": bool(self.early_exit)},
            diagnostics=diag,
            reconstruction=chosen[1] if chosen else None,
        )


def _check_threshold(threshold):
    if not 0 < threshold < 1:
        raise ParameterError(f"threshold must lie in (0, 1), got {threshold}")


def _check_delta(delta):
    if not delta > 0:
        raise ParameterError(f"noise level delta must be > 0, got {delta}")


def dual_grid_curve(m, p, reg: Regularizer, grid: AlphaGrid, ssim_params: SsimParams | None = None,
                    workers: int | None = None) -> SweepCurve:
    """SSIM between the camera-grid and shifted-grid reconstructions for every grid ``alpha``."""
    # A threshold above any SSIM keeps the scan going over the whole grid.
    sweep = _Sweep(m, p, reg, grid, threshold=math.inf, ssim_params=ssim_params, workers=workers)
    return sweep.run().dual


def dual_grid_select(m, p, reg: Regularizer, grid: AlphaGrid, threshold: float,
                     ssim_params: SsimParams | None = None, early_exit: bool = False,
                     workers: int | None = None, diagnostics: dict | None = None) -> SelectionReport:
    """Smallest grid ``alpha`` whose dual-grid SSIM reaches ``threshold``.

    Parameters
    ----------
    m, p : array_like
        Measurement and camera-grid PSF.
    reg : Regularizer
        Solver used identically on both grids.
    grid : AlphaGrid
        Candidate values, scanned in increasing order.
    threshold : float
        Target SSIM in ``(0, 1)``.
    early_exit : bool
        Stop at the first crossing instead of completing the curve.

    Returns
    -------
    SelectionReport
        ``reconstruction`` is the camera-grid image at the chosen ``alpha``.
        If no grid value reaches the threshold the status is
        ``threshold-not-reached`` and ``chosen_alpha`` is ``None``.
    """
    _check_threshold(threshold)
    sweep = _Sweep(m, p, reg, grid, threshold=threshold, ssim_params=ssim_params,
                   early_exit=early_exit, workers=workers)
    return sweep.run().dual_report(diagnostics)


def residual_curve(m, p, reg: Regularizer, grid: AlphaGrid, workers: int | None = None) -> SweepCurve:
    """Residual norm ``||p * f_alpha - m||_F`` along the grid."""
    return _Sweep(m, p, reg, grid, delta=math.inf, workers=workers).run().disc


def discrepancy_select(m, p, reg: Regularizer, grid: AlphaGrid, delta: float,
                       early_exit: bool = False, workers: int | None = None,
                       diagnostics: dict | None = None) -> SelectionReport:
    """Grid ``alpha`` whose residual norm is closest to ``delta`` at the first crossing.

    The first pair of neighbouring grid points whose residuals bracket
    ``delta`` is located and the one with the smaller ``|residual - delta|``
    is returned.  When the residual curve never reaches ``delta`` the status
    is ``no-crossing``.
    """
    _check_delta(delta)
    sweep = _Sweep(m, p, reg, grid, delta=delta, early_exit=early_exit, workers=workers)
    return sweep.run().disc_report(diagnostics)


def compare_methods(m, p, reg: Regularizer, grid: AlphaGrid, threshold: float, delta: float,
                    ssim_params: SsimParams | None = None, early_exit: bool = False,
                    workers: int | None = None, diagnostics: dict | None = None):
    """Run both rules in one scan; returns ``(dual_grid_report, discrepancy_report)``.

    Results equal separate calls to :func:`dual_grid_select` and
    :func:`discrepancy_select`; each camera-grid solve is done only once.
    """
    _check_threshold(threshold)
    _check_delta(delta)
    sweep = _Sweep(m, p, reg, grid, threshold=threshold, delta=delta, ssim_params=ssim_params,
                   early_exit=early_exit, workers=workers).run()
    return sweep.dual_report(diagnostics), sweep.disc_report(diagnostics)


def estimate_noise(m, patches) -> tuple:
    """Noise level from the pixel spread inside flat patches.

    Parameters
    ----------
    m : array_like
        Measured image of size ``n x n``.
    patches : sequence of (x, y, w, h)
        At least four rectangles, column ``x``, row ``y``, each at least 8x8.

    Returns
    -------
    sigma_mean : float
        Mean of the per-patch standard deviations.
    delta : float
        ``sigma_mean * sqrt(n * n)``, an estimate of the noise Frobenius norm.
    """
    m = np.asarray(m, dtype=np.float64)
    patches = list(patches)
    if len(patches) < 4:
        raise ParameterError(f"noise estimation needs at least 4 patches, got {len(patches)}")
    rows, cols = m.shape
    sigmas = []
    for patch in patches:
        x, y, w, h = (int(v) for v in patch)
        if w < 8 or h < 8:
            raise ParameterError(f"patch {patch} is smaller than 8x8")
        if x < 0 or y < 0 or x + w > cols or y + h > rows:
            raise ParameterError(f"patch {patch} lies outside the {rows}x{cols} image")
        block = m[y:y + h, x:x + w]
        # np.std of a constant block can come out at ~1e-17 from rounding of the mean.
        sigmas.append(0.0 if np.ptp(block) == 0 else float(np.std(block, ddof=1)))
    sigma_mean = float(np.mean(sigmas))
    return sigma_mean, sigma_mean * math.sqrt(m.size)


def shift_similarity(f, reg: Regularizer | None = None, alpha: float | None = None,
                     ssim_params: SsimParams | None = None) -> float:
    """SSIM between an image and its half-pixel shifted copy.

    With a regularizer the image is first denoised (identity blur) at
    ``alpha`` and the denoised image is compared with its shifted copy.
    """
    f = as_image(f)
    if reg is not None:
        if alpha is None:
            raise ParameterError("alpha is required when a regularizer is given")
        f, _ = reg.solve(f, delta_psf(f.shape[0]), alpha)
    return ssim(f, shift_image(f), ssim_params)
