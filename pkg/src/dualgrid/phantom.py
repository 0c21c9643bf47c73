"""Synthetic piecewise-constant scenes and simulated blurred measurements.

Shape geometry is given in unit-square coordinates: ``position`` is the
``(x, y)`` centre with ``x`` to the right and ``y`` downwards, both in
``[0, 1]``, and ``scale`` is a radius or half-size as a fraction of the image
side.  A scene therefore renders at any grid size.  Pixels are sampled at
their centres and later shapes paint over earlier ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .imaging import MIN_SIZE, add_gaussian_noise, as_image, convolve_periodic

__all__ = [
    "SHAPE_KINDS",
    "Shape",
    "SceneSpec",
    "render_scene",
    "reference_scene",
    "random_scene",
    "reference_flat_patches",
    "disc_psf",
    "simulate_measurement",
]

SHAPE_KINDS = ("disc", "rectangle", "triangle", "annulus")


@dataclass(frozen=True)
class Shape:
    """One filled shape.

    ``aspect`` is the height/width ratio of rectangles, ``inner`` the
    inner/outer radius ratio of annuli, and ``angle`` a counter-clockwise
    rotation in degrees for rectangles and triangles.
    """

    kind: str
    position: tuple
    scale: float
    intensity: float
    angle: float = 0.0
    aspect: float = 1.0
    inner: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if self.kind not in SHAPE_KINDS:
            raise ParameterError(f"unknown shape kind {self.kind!r}; expected one of {SHAPE_KINDS}")
        if len(self.position) != 2:
            raise ParameterError("position must be an (x, y) pair")
        if not self.scale > 0:
            raise ParameterError(f"shape scale must be positive, got {self.scale}")
        if not 0 <= self.intensity <= 1:
            raise ParameterError(f"shape intensity must lie in [0, 1], got {self.intensity}")
        if not self.aspect > 0:
            raise ParameterError("rectangle aspect must be positive")
        if not 0 < self.inner < 1:
            raise ParameterError("annulus inner ratio must lie in (0, 1)")

    def extent(self) -> tuple:
        """Half sizes ``(ex, ey)`` of an axis-aligned box containing the shape."""
        if self.kind == "rectangle":
            t = math.radians(self.angle)
            a, b = self.scale, self.scale * self.aspect
            c, s = abs(math.cos(t)), abs(math.sin(t))
            return (c * a + s * b, s * a + c * b)
        return (self.scale, self.scale)

    def mask(self, x, y) -> np.ndarray:
        cx, cy = self.position
        dx = x - cx
        dy = y - cy
        if self.kind == "disc":
            return dx * dx + dy * dy <= self.scale**2
        if self.kind == "annulus":
            r2 = dx * dx + dy * dy
            return (r2 <= self.scale**2) & (r2 >= (self.inner * self.scale) ** 2)
        # Rotate into the shape frame; y points down, so flip to keep
        # positive angles counter-clockwise on screen.
        t = math.radians(self.angle)
        c, s = math.cos(t), math.sin(t)
        u = c * dx - s * dy
        v = s * dx + c * dy
        if self.kind == "rectangle":
            return (np.abs(u) <= self.scale) & (np.abs(v) <= self.scale * self.aspect)
        verts = [
            (self.scale * math.cos(math.radians(90 + 120 * k)), -self.scale * math.sin(math.radians(90 + 120 * k)))
            for k in range(3)
        ]
        inside = np.ones(np.shape(u), dtype=bool)
        for k in range(3):
            (x0, y0), (x1, y1) = verts[k], verts[(k + 1) % 3]
            cross = (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0)
            inside &= cross <= 0
        return inside


@dataclass(frozen=True)
class SceneSpec:
    size: int
    shapes: tuple = field(default_factory=tuple)
    background: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "shapes", tuple(s if isinstance(s, Shape) else Shape(**s) for s in self.shapes)
        )
        if int(self.size) != self.size or self.size < MIN_SIZE:
            raise ParameterError(f"scene size must be an integer >= {MIN_SIZE}, got {self.size}")
        if not 0 <= self.background <= 1:
            raise ParameterError("background intensity must lie in [0, 1]")
        for s in self.shapes:
            cx, cy = s.position
            ex, ey = s.extent()
            if cx - ex < 0 or cx + ex > 1 or cy - ey < 0 or cy + ey > 1:
                raise ParameterError(f"{s.kind} at {s.position} with scale {s.scale} leaves the unit square")

    def with_size(self, size: int) -> "SceneSpec":
        return SceneSpec(size=size, shapes=self.shapes, background=self.background)

    def to_dict(self) -> dict:
        return {
            "size": int(self.size),
            "background": self.background,
            "shapes": [dict(asdict(s), position=list(s.position)) for s in self.shapes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(size=int(d["size"]), shapes=tuple(Shape(**s) for s in d.get("shapes", [])),
                   background=float(d.get("background", 0.0)))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SceneSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def render_scene(spec: SceneSpec) -> np.ndarray:
    n = spec.size
    coords = (np.arange(n) + 0.5) / n
    x, y = np.meshgrid(coords, coords)
    img = np.full((n, n), float(spec.background))
    for s in spec.shapes:
        img[s.mask(x, y)] = s.intensity
    return img


def reference_scene(size: int = 512) -> SceneSpec:
    """Canonical test scene: geometric shapes with varied gray levels and edge directions.

    The four corner squares of side ``0.1`` hold plain background so noise can
    be estimated there (see :func:`reference_flat_patches`).
    """
    shapes = [
        Shape("rectangle", (0.50, 0.50), 0.36, 0.15, aspect=1.0),
        Shape("disc", (0.27, 0.27), 0.11, 0.85),
        Shape("annulus", (0.73, 0.27), 0.12, 0.55, inner=0.55),
        Shape("rectangle", (0.28, 0.70), 0.10, 0.65, angle=30, aspect=0.5),
        Shape("triangle", (0.72, 0.72), 0.13, 0.95, angle=15),
        Shape("rectangle", (0.50, 0.48), 0.07, 0.40, angle=45),
        Shape("triangle", (0.50, 0.79), 0.06, 0.30, angle=-20),
        Shape("disc", (0.73, 0.27), 0.04, 1.00),
        Shape("rectangle", (0.50, 0.20), 0.09, 0.75, angle=-60, aspect=0.25),
        Shape("disc", (0.20, 0.50), 0.035, 0.05),
        Shape("rectangle", (0.82, 0.50), 0.025, 0.9, angle=10, aspect=3.0),
        Shape("triangle", (0.30, 0.27), 0.05, 0.35, angle=180),
    ]
    return SceneSpec(size=size, shapes=tuple(shapes), background=0.25)


def reference_flat_patches(size: int = 512) -> list:
    """``(x, y, w, h)`` patches inside the plain-background corners of :func:`reference_scene`."""
    w = max(8, int(0.08 * size))
    lo = max(1, int(0.01 * size))
    hi = size - lo - w
    return [(lo, lo, w, w), (hi, lo, w, w), (lo, hi, w, w), (hi, hi, w, w)]


def random_scene(size: int, seed: int, count: int = 60, background: float | None = None,
                 min_scale: float = 0.01, max_scale: float = 0.12) -> SceneSpec:
    """Reproducible scene of ``count`` random shapes drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    bg = float(rng.uniform(0.1, 0.9)) if background is None else background
    shapes = []
    while len(shapes) < count:
        kind = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
        scale = float(np.exp(rng.uniform(np.log(min_scale), np.log(max_scale))))
        aspect = float(rng.uniform(0.3, 1.0)) if kind == "rectangle" else 1.0
        reach = scale * math.hypot(1.0, aspect)
        if reach >= 0.5:
            continue
        pos = tuple(float(v) for v in rng.uniform(reach, 1 - reach, size=2))
        shapes.append(Shape(kind, pos, scale, float(np.round(rng.uniform(0, 1), 3)),
                            angle=float(rng.uniform(0, 180)), aspect=aspect,
                            inner=float(rng.uniform(0.3, 0.8))))
    return SceneSpec(size=size, shapes=tuple(shapes), background=bg)


def disc_psf(radius: float, n: int) -> np.ndarray:
    """Normalized indicator of ``x**2 + y**2 <= radius**2`` on the integer lattice, FFT-origin layout."""
    if not 0 < radius < n / 2:
        raise ParameterError(f"disc radius must lie in (0, n/2) = (0, {n / 2}), got {radius}")
    off = np.fft.fftfreq(n, d=1.0 / n)
    yy, xx = np.meshgrid(off, off, indexing="ij")
    p = (xx * xx + yy * yy <= radius * radius).astype(np.float64)
    return p / p.sum()


def simulate_measurement(f, radius: float, noise_level: float, seed: int):
    """Blur ``f`` with a disc PSF and add relative Gaussian noise.

    The noise norm is ``noise_level`` times the norm of the *blurred* image.

    Returns
    -------
    m : numpy.ndarray
        Blurred noisy measurement.
    p : numpy.ndarray
        The PSF that produced it.
    """
    f = as_image(f)
    p = disc_psf(radius, f.shape[0])
    blurred = convolve_periodic(f, p)
    return add_gaussian_noise(blurred, noise_level, seed), p
