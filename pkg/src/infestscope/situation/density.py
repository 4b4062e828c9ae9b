"""Gaussian kernel density field of infected-tree locations.

Points are mapped affinely into the unit square (x and y scaled
independently by the plot extent) before the estimate

    f(z) = 1 / (n h^2) * sum_i K(|z - z_i| / h),   K(u) = exp(-u^2 / 2) / (2 pi)

is evaluated at every grid-cell center. The default bandwidth is
``h = n ** (-1 / (d + 4))`` with ``d = 2``.

The Gaussian kernel factorizes over the two axes, so the whole grid is one
matrix product ``Ky @ Kx.T``. The result equals the direct double sum up to
floating-point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_GRID = (256, 256)
_CHUNK = 65536


class DensityError(ValueError):
    pass


@dataclass(frozen=True)
class PlotExtent:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DensityError(
                f"degenerate extent ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def normalize(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return (x - self.x_min) / self.width, (y - self.y_min) / self.height

    def denormalize(self, u, v):
        return self.x_min + np.asarray(u) * self.width, self.y_min + np.asarray(v) * self.height

    def contains(self, x, y) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def around(cls, points, margin: float = 0.0) -> "PlotExtent":
        """Bounding region of ``points`` grown by ``margin`` on every side."""
        if not points:
            raise DensityError("cannot derive an extent from zero points")
        xs = [p.x for p in points]
        ys = [p.y for p in points]
        return cls(min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin)


def bandwidth(n: int, d: int = 2) -> float:
    if n < 1:
        raise DensityError("bandwidth needs at least one point")
    return float(n) ** (-1.0 / (d + 4))


@dataclass(frozen=True, eq=False)
class DensityField:
    extent: PlotExtent
    values: np.ndarray  # (grid_h, grid_w), row = y
    bandwidth: float
    bandwidth_xy: tuple
    n_points: int
    normalization: dict

    @property
    def grid_w(self) -> int:
        return self.values.shape[1]

    @property
    def grid_h(self) -> int:
        return self.values.shape[0]

    @property
    def cell_area(self) -> float:
        # in normalized units
        return 1.0 / (self.grid_w * self.grid_h)

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def cell_centers(self):
        """Normalized ``(u, v)`` of every cell center as two 1-D arrays."""
        u = (np.arange(self.grid_w) + 0.5) / self.grid_w
        v = (np.arange(self.grid_h) + 0.5) / self.grid_h
        return u, v

    def cell_center_pixels(self, row: int, col: int) -> tuple[float, float]:
        x, y = self.extent.denormalize((col + 0.5) / self.grid_w, (row + 0.5) / self.grid_h)
        return float(x), float(y)

    def metadata(self) -> dict:
        return {
            "extent": self.extent.as_list(),
            "grid_w": self.grid_w,
            "grid_h": self.grid_h,
            "bandwidth": self.bandwidth,
            "bandwidth_xy": list(self.bandwidth_xy),
            "n_points": self.n_points,
            "normalization": self.normalization,
            "min": float(self.values.min()),
            "max": float(self.values.max()),
            "mass": self.mass(),
        }

    def to_dict(self) -> dict:
        out = self.metadata()
        out["values"] = self.values.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DensityField":
        try:
            values = np.asarray(d["values"], dtype=np.float64)
            if values.ndim != 2 or values.shape != (d["grid_h"], d["grid_w"]):
                raise DensityError("density grid shape disagrees with grid_w/grid_h")
            return cls(
                PlotExtent(*d["extent"]),
                values,
                float(d["bandwidth"]),
                tuple(d.get("bandwidth_xy", (d["bandwidth"], d["bandwidth"]))),
                int(d["n_points"]),
                d.get("normalization", {}),
            )
        except (KeyError, TypeError) as exc:
            raise DensityError(f"malformed density field: {exc}") from None


def _bandwidths(u: np.ndarray, v: np.ndarray, scott: bool):
    n = len(u)
    h = bandwidth(n, 2)
    if not scott:
        return h, h, h
    if n < 2:
        raise DensityError("scott bandwidth needs at least two points")
    sx, sy = float(np.std(u, ddof=1)), float(np.std(v, ddof=1))
    if sx == 0.0 or sy == 0.0:
        raise DensityError("scott bandwidth undefined for zero spread along an axis")
    return h, h * sx, h * sy


def _axis_kernel(centers: np.ndarray, coords: np.ndarray, h: float) -> np.ndarray:
    d = (centers[:, None] - coords[None, :]) / h
    return np.exp(-0.5 * d * d)


def kde(infected, extent: PlotExtent, grid=DEFAULT_GRID, scott: bool = False) -> DensityField:
    """Evaluate the kernel density of ``infected`` tree points on a grid.

    Parameters
    ----------
    infected : sequence of TreePoint
        Tree centers in pixel coordinates, all inside ``extent``.
    extent : PlotExtent
        Frame mapped onto the unit square.
    grid : (int, int)
        ``(grid_w, grid_h)``.
    scott : bool
        Multiply the bandwidth by the per-axis sample standard deviation of
        the normalized coordinates (Scott's rule) instead of using it as is.
    """
    n = len(infected)
    if n == 0:
        raise DensityError("empty infected set")
    gw, gh = (int(g) for g in grid)
    if gw < 1 or gh < 1:
        raise DensityError("grid dimensions must be >= 1")
    xs = np.fromiter((p.x for p in infected), dtype=np.float64, count=n)
    ys = np.fromiter((p.y for p in infected), dtype=np.float64, count=n)
    if xs.min() < extent.x_min or xs.max() > extent.x_max or ys.min() < extent.y_min or ys.max() > extent.y_max:
        raise DensityError("infected points must lie inside the extent")
    u, v = extent.normalize(xs, ys)

    h, hx, hy = _bandwidths(u, v, scott)

    cu = (np.arange(gw) + 0.5) / gw
    cv = (np.arange(gh) + 0.5) / gh
    values = np.zeros((gh, gw), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        sl = slice(start, start + _CHUNK)
        values += _axis_kernel(cv, v[sl], hy) @ _axis_kernel(cu, u[sl], hx).T
    values *= 1.0 / (2.0 * math.pi * n * hx * hy)

    norm = {
        "mode": "unit_square",
        "x_offset": extent.x_min,
        "x_scale": extent.width,
        "y_offset": extent.y_min,
        "y_scale": extent.height,
        "bandwidth_rule": "scott" if scott else "n^(-1/6)",
    }
    return DensityField(extent, values, h, (hx, hy), n, norm)


def density_at(infected, extent: PlotExtent, x: float, y: float, scott: bool = False) -> float:
    """The same estimate evaluated at one arbitrary location (no grid)."""
    if not infected:
        raise DensityError("empty infected set")
    u, v = extent.normalize([p.x for p in infected], [p.y for p in infected])
    _, hx, hy = _bandwidths(u, v, scott)
    qu, qv = extent.normalize(x, y)
    du = (qu - u) / hx
    dv = (qv - v) / hy
    return float(np.exp(-0.5 * (du * du + dv * dv)).sum() / (2.0 * math.pi * len(infected) * hx * hy))


def sample_density(f: DensityField, x: float, y: float) -> float:
    """Bilinear interpolation of the grid at pixel location ``(x, y)``.

    Grid values sit at cell centers; within half a cell of the extent border
    the nearest edge values are extended.
    """
    if not f.extent.contains(x, y):
        raise DensityError(f"query ({x}, {y}) outside the density extent")
    u, v = f.extent.normalize(x, y)
    return float(_bilinear(f.values, float(u) * f.grid_w - 0.5, float(v) * f.grid_h - 0.5))


def _bilinear(values: np.ndarray, fx: float, fy: float) -> float:
    gh, gw = values.shape
    fx = min(max(fx, 0.0), gw - 1.0)
    fy = min(max(fy, 0.0), gh - 1.0)
    x0 = int(math.floor(fx))
    y0 = int(math.floor(fy))
    x1 = min(x0 + 1, gw - 1)
    y1 = min(y0 + 1, gh - 1)
    tx = fx - x0
    ty = fy - y0
    top = values[y0, x0] * (1.0 - tx) + values[y0, x1] * tx
    bottom = values[y1, x0] * (1.0 - tx) + values[y1, x1] * tx
    return top * (1.0 - ty) + bottom * ty


def local_maxima(values: np.ndarray) -> list[tuple[int, int]]:
    """Cells strictly greater than all 8 neighbours, highest first."""
    p = np.pad(values, 1, mode="constant", constant_values=-np.inf)
    core = p[1:-1, 1:-1]
    is_max = np.ones_like(core, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            is_max &= core > p[1 + dy : p.shape[0] - 1 + dy, 1 + dx : p.shape[1] - 1 + dx]
    rows, cols = np.nonzero(is_max)
    order = np.argsort(-core[rows, cols], kind="stable")
    return [(int(rows[i]), int(cols[i])) for i in order]


def find_peaks(f: DensityField, k: int) -> list[dict]:
    """Top-``k`` local maxima as pixel coordinates with their density values."""
    out = []
    for row, col in local_maxima(f.values)[:k]:
        x, y = f.cell_center_pixels(row, col)
        out.append({"row": row, "col": col, "x": x, "y": y, "value": float(f.values[row, col])})
    return out
