"""Healthy-tree infection risk from the infected-tree density field.

A healthy tree's risk is the mean density over all grid cells whose centers
lie within radius ``r`` of the tree (distances in normalized extent units).
When no cell center falls inside that disc the field is interpolated at the
tree position instead.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..detections import TreeClass, TreePoint
from .density import DensityField, _bilinear

DEFAULT_RADIUS = 0.05
THREADS_ENV = "INFESTSCOPE_THREADS"


def thread_count() -> int:
    """Worker cap from ``INFESTSCOPE_THREADS``; 0 or unset means one per CPU."""
    try:
        n = int(os.environ.get(THREADS_ENV, "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class RiskTable:
    entries: list  # (TreePoint, risk)
    radius: float

    def risks(self) -> np.ndarray:
        return np.array([r for _, r in self.entries], dtype=np.float64)

    def summary(self) -> dict:
        r = self.risks()
        if len(r) == 0:
            return {"count": 0, "radius": self.radius}
        return {
            "count": int(len(r)),
            "radius": self.radius,
            "min": float(r.min()),
            "max": float(r.max()),
            "mean": float(r.mean()),
            "median": float(np.median(r)),
        }


def neighborhood_mean(f: DensityField, u: float, v: float, r: float) -> float:
    """Mean of the cells centered within ``r`` of normalized ``(u, v)``."""
    gw, gh = f.grid_w, f.grid_h
    # candidate index window, then exact distance test
    c0 = max(int(np.floor((u - r) * gw - 0.5)), 0)
    c1 = min(int(np.ceil((u + r) * gw - 0.5)), gw - 1)
    r0 = max(int(np.floor((v - r) * gh - 0.5)), 0)
    r1 = min(int(np.ceil((v + r) * gh - 0.5)), gh - 1)
    if c0 > c1 or r0 > r1:
        return float("nan")
    cu = (np.arange(c0, c1 + 1) + 0.5) / gw
    cv = (np.arange(r0, r1 + 1) + 0.5) / gh
    d2 = (cv[:, None] - v) ** 2 + (cu[None, :] - u) ** 2
    inside = d2 <= r * r
    if not inside.any():
        return float("nan")
    return float(f.values[r0 : r1 + 1, c0 : c1 + 1][inside].mean())


def _score_one(f: DensityField, tree: TreePoint, r: float) -> float:
    u, v = f.extent.normalize(tree.x, tree.y)
    u, v = float(u), float(v)
    m = neighborhood_mean(f, u, v, r)
    if np.isnan(m):
        return float(_bilinear(f.values, u * f.grid_w - 0.5, v * f.grid_h - 0.5))
    return m


def risk_scores(healthy, f: DensityField, r: float = DEFAULT_RADIUS, workers: int | None = None) -> RiskTable:
    """Score every healthy tree; output order follows input order."""
    if r <= 0:
        raise ValueError("risk radius must be > 0")
    trees = [t for t in healthy if t.cls == TreeClass.HEALTHY]
    for t in trees:
        if not f.extent.contains(t.x, t.y):
            raise ValueError(f"healthy tree at ({t.x}, {t.y}) outside the density extent")
    workers = workers or thread_count()
    if workers > 1 and len(trees) > 256:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            risks = list(pool.map(lambda t: _score_one(f, t, r), trees))
    else:
        risks = [_score_one(f, t, r) for t in trees]
    return RiskTable(list(zip(trees, risks)), r)
