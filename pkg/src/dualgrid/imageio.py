"""Grayscale image files.

PNG and PGM (ASCII ``P2`` or binary ``P5``, any ``maxval``) map linearly to
``[0, 1]``; ``.npy`` files hold float64 arrays verbatim and are the lossless
exchange format between CLI steps.
"""

from __future__ import annotations

import io
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParameterError

__all__ = ["load_image", "save_image", "load_psf", "atomic_writer", "write_text", "save_npy"]

_GRAY_MODES = {"1", "L", "I", "I;16", "I;16B", "I;16L", "F"}


def load_image(path) -> np.ndarray:
    """Load a grayscale image as float64 in ``[0, 1]`` (``.npy`` kept as stored)."""
    path = Path(path)
    if path.suffix.lower() == ".npy":
        arr = np.load(path)
        if arr.ndim != 2:
            raise ParameterError(f"{path}: expected a 2-D array, got shape {arr.shape}")
        return np.asarray(arr, dtype=np.float64)
    try:
        im = Image.open(path)
        im.load()
    except OSError as exc:
        raise OSError(f"{path}: cannot read image ({exc})") from exc
    if im.mode not in _GRAY_MODES:
        raise ParameterError(f"{path}: only grayscale images are supported, got mode {im.mode!r}")
    arr = np.asarray(im)
    if im.mode in ("1", "F"):
        return arr.astype(np.float64)
    # Pillow already rescales PGM files with other maxvals to the full 8 or 16-bit range.
    maxval = 255 if im.mode == "L" else 65535
    return arr.astype(np.float64) / maxval


@contextmanager
def atomic_writer(path, mode="wb"):
    """Open a temporary sibling of ``path`` and move it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text: str) -> None:
    with atomic_writer(path, "w") as fh:
        fh.write(text)


def save_npy(path, arr) -> None:
    with atomic_writer(path) as fh:
        np.save(fh, np.asarray(arr, dtype=np.float64))


def save_image(path, arr, bits: int = 16) -> None:
    """Clamp to ``[0, 1]``, quantize to ``bits`` and write PNG or PGM by suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".npy":
        save_npy(path, arr)
        return
    if bits not in (8, 16):
        raise ParameterError(f"bit depth must be 8 or 16, got {bits}")
    maxval = 255 if bits == 8 else 65535
    q = np.rint(np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0) * maxval)
    im = Image.fromarray(q.astype(np.uint8 if bits == 8 else np.uint16))
    fmt = {".png": "PNG", ".pgm": "PPM", ".pnm": "PPM"}.get(suffix)
    if fmt is None:
        raise ParameterError(f"{path}: unsupported image format {suffix!r}")
    buf = io.BytesIO()
    im.save(buf, format=fmt)
    with atomic_writer(path) as fh:
        fh.write(buf.getvalue())


def load_psf(path, n: int) -> np.ndarray:
    """Load a centred kernel and return a unit-sum PSF in FFT-origin layout.

    Small odd-sized stencils are centred at their middle pixel; an ``n x n``
    kernel is centred at index ``(n // 2, n // 2)``.
    """
    from .imaging import as_psf, embed_stencil

    k = load_image(path)
    if np.any(k < 0):
        raise ParameterError(f"{path}: PSF has negative entries")
    total = k.sum()
    if not total > 0:
        raise ParameterError(f"{path}: PSF sums to zero")
    k = k / total
    if k.shape == (n, n):
        p = np.fft.ifftshift(k)
    else:
        p = embed_stencil(k, n)
    return as_psf(p / p.sum(), n)
