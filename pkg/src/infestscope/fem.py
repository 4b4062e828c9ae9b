"""Feature enhancement: disease-sensitive channels computed from plain RGB.

Three per-pixel maps are stacked into a task-oriented feature image (TOFI):

    channel 0  VDVI     = (2G - R - B) / (2G + R + B)
    channel 1  texture  = |laplacian(gray)|
    channel 2  NGBDI    = (G - B) / (G + B)

Both indices are bounded in ``[-1, 1]`` and are mapped affinely onto
``[0, 1]``. The texture map has no analytic bound, so it is clipped at a
per-image percentile and min-max scaled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Raster, RasterError

EPS = 1e-8
TEXTURE_CLIP_PERCENTILE = 99.0

# 4-neighbour discrete Laplacian
LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)


def _split_rgb(rgb: Raster):
    if rgb.channels != 3:
        raise RasterError(f"expected a 3-channel RGB raster, got {rgb.channels} channel(s)")
    d = rgb.data
    return d[:, :, 0], d[:, :, 1], d[:, :, 2]


def _normalized_difference(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    ok = np.abs(den) >= EPS
    np.divide(num, den, out=out, where=ok)
    return np.clip(out, -1.0, 1.0)


def vdvi(rgb: Raster) -> np.ndarray:
    """Visible-band difference vegetation index, shape ``(H, W)``.

    Pixels whose denominator ``2G + R + B`` is below ``EPS`` get 0.
    """
    r, g, b = _split_rgb(rgb)
    return _normalized_difference(2.0 * g - r - b, 2.0 * g + r + b)


def ngbdi(rgb: Raster) -> np.ndarray:
    """Normalized green-blue difference index, shape ``(H, W)``."""
    _, g, b = _split_rgb(rgb)
    return _normalized_difference(g - b, g + b)


def grayscale(rgb: Raster) -> np.ndarray:
    """Rec.601 luma, ``(299 R + 587 G + 114 B) / 1000``.

    Integer weights keep white mapped to exactly 1.0.
    """
    r, g, b = _split_rgb(rgb)
    return (299.0 * r + 587.0 * g + 114.0 * b) / 1000.0


def abs_laplacian(gray: np.ndarray) -> np.ndarray:
    """``|laplacian|`` of a 2-D array with the 4-neighbour kernel, edge-replicated."""
    gray = np.asarray(gray, dtype=np.float64)
    p = np.pad(gray, 1, mode="edge")
    lap = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * gray
    return np.abs(lap)


def laplacian_texture(rgb: Raster) -> np.ndarray:
    return abs_laplacian(grayscale(rgb))


@dataclass(frozen=True, eq=False)
class Tofi:
    """Three-channel enhanced feature image plus the normalization it used."""

    base: Raster
    norm_meta: dict

    @property
    def vdvi(self) -> np.ndarray:
        return self.base.data[:, :, 0]

    @property
    def texture(self) -> np.ndarray:
        return self.base.data[:, :, 1]

    @property
    def ngbdi(self) -> np.ndarray:
        return self.base.data[:, :, 2]


def _scale_texture(t: np.ndarray, percentile: float):
    clip_at = float(np.percentile(t, percentile))
    clipped = np.minimum(t, clip_at)
    lo = float(clipped.min())
    hi = float(clipped.max())
    if hi - lo <= 0.0:
        return np.zeros_like(t), lo, hi
    return (clipped - lo) / (hi - lo), lo, hi


def build_tofi(rgb: Raster, clip_percentile: float = TEXTURE_CLIP_PERCENTILE) -> Tofi:
    v = vdvi(rgb)
    n = ngbdi(rgb)
    t_scaled, t_lo, t_hi = _scale_texture(laplacian_texture(rgb), clip_percentile)
    stacked = np.stack([(v + 1.0) / 2.0, t_scaled, (n + 1.0) / 2.0], axis=-1)
    np.clip(stacked, 0.0, 1.0, out=stacked)
    meta = {
        "vdvi": {"min": -1.0, "max": 1.0, "clip_percentile": None},
        "texture": {"min": t_lo, "max": t_hi, "clip_percentile": clip_percentile},
        "ngbdi": {"min": -1.0, "max": 1.0, "clip_percentile": None},
    }
    return Tofi(Raster._trusted(stacked), meta)
