"""Dense healthy-tree clusters (DBSCAN) and their covariance ellipses."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np

NOISE = -1
DEFAULT_MIN_PTS = 4
ELLIPSE_SIGMAS = 2.0


class ClusteringError(ValueError):
    pass


def _coords(points) -> np.ndarray:
    if len(points) == 0:
        return np.zeros((0, 2))
    if hasattr(points[0], "x"):
        return np.array([(p.x, p.y) for p in points], dtype=np.float64)
    return np.asarray(points, dtype=np.float64).reshape(-1, 2)


def region_queries(xy: np.ndarray, eps: float) -> list[list[int]]:
    """Indices within ``eps`` (inclusive, self included) of every point, ascending.

    Points are bucketed into a uniform grid of slightly-larger-than-``eps``
    cells so only the 3x3 surrounding cells are scanned. Distances are
    compared squared.
    """
    n = len(xy)
    eps2 = eps * eps
    cells = defaultdict(list)
    # inflated cell size keeps pairs at distance exactly eps in adjacent cells
    keys = np.floor(xy / (eps * (1.0 + 1e-6))).astype(np.int64)
    for i in range(n):
        cells[(keys[i, 0], keys[i, 1])].append(i)
    out = []
    for i in range(n):
        kx, ky = keys[i]
        cand = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                cand.extend(cells.get((kx + dx, ky + dy), ()))
        cand = np.array(sorted(cand), dtype=np.int64)
        d = xy[cand] - xy[i]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
        out.append(cand[d2 <= eps2].tolist())
    return out


def dbscan(points, eps: float, min_pts: int = DEFAULT_MIN_PTS) -> list[int]:
    """Density-based clustering; returns one label per point (``NOISE`` = -1).

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Points are visited in input order; every unvisited core
    point opens the next cluster id, which is expanded breadth-first before
    the scan continues. A border point reachable from several clusters keeps
    the first cluster that claims it.
    """
    if eps <= 0:
        raise ClusteringError("eps must be > 0")
    if min_pts < 1:
        raise ClusteringError("min_pts must be >= 1")
    xy = _coords(points)
    n = len(xy)
    if n == 0:
        return []
    neigh = region_queries(xy, eps)
    core = [len(nb) >= min_pts for nb in neigh]
    labels = [None] * n
    next_id = 0
    for i in range(n):
        if labels[i] is not None or not core[i]:
            continue
        cid = next_id
        next_id += 1
        labels[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neigh[p]:
                if labels[q] is None:
                    labels[q] = cid
                    if core[q]:
                        queue.append(q)
    return [NOISE if lab is None else lab for lab in labels]


def core_mask(points, eps: float, min_pts: int) -> list[bool]:
    return [len(nb) >= min_pts for nb in region_queries(_coords(points), eps)]


def default_eps(points, k: int = DEFAULT_MIN_PTS) -> float:
    """Median distance to the ``k``-th nearest neighbour (self excluded)."""
    xy = _coords(points)
    n = len(xy)
    if n < 2:
        raise ClusteringError("need at least two points to derive eps")
    k = min(k, n - 1)
    kth = np.empty(n)
    for start in range(0, n, 1024):
        block = xy[start : start + 1024]
        d2 = ((block[:, None, :] - xy[None, :, :]) ** 2).sum(axis=-1)
        # column k of the sorted row is the k-th neighbour (column 0 is self)
        kth[start : start + len(block)] = np.partition(d2, k, axis=1)[:, k]
    eps = float(np.median(np.sqrt(kth)))
    if eps <= 0:
        raise ClusteringError("derived eps is zero (coincident points); pass eps explicitly")
    return eps


# --------------------------------------------------------------------------
# Ellipses
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Ellipse:
    center: tuple
    semi_major: float
    semi_minor: float
    angle: float  # radians from +x, in (-pi/2, pi/2]

    def as_dict(self) -> dict:
        return {
            "center": list(self.center),
            "semi_major": self.semi_major,
            "semi_minor": self.semi_minor,
            "angle": self.angle,
        }


def _wrap_half_turn(theta: float) -> float:
    # map into (-pi/2, pi/2]
    t = math.fmod(theta, math.pi)
    if t <= -math.pi / 2:
        t += math.pi
    elif t > math.pi / 2:
        t -= math.pi
    return t


def fit_ellipse(members, sigmas: float = ELLIPSE_SIGMAS, rel_tol: float = 1e-12) -> Ellipse:
    """Covariance ellipse of a point set.

    Semi-axes are ``sigmas * sqrt(eigenvalue)`` of the sample covariance
    (2 sigma by default, roughly 95% of a Gaussian scatter). Equal
    eigenvalues report angle 0. Collinear input raises ClusteringError.
    """
    xy = _coords(members)
    if len(xy) < 3:
        raise ClusteringError(f"fit_ellipse needs at least 3 points, got {len(xy)}")
    center = xy.mean(axis=0)
    d = xy - center
    cov = d.T @ d / (len(xy) - 1)
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    # closed-form symmetric 2x2 eigen-decomposition
    mean = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    lam1 = mean + rad
    lam2 = mean - rad
    if lam1 <= 0 or lam2 <= rel_tol * lam1:
        raise ClusteringError("points are collinear; covariance has a zero minor axis")
    if rad <= rel_tol * lam1:
        angle = 0.0
    else:
        angle = _wrap_half_turn(0.5 * math.atan2(2.0 * b, a - c))
    return Ellipse(
        (float(center[0]), float(center[1])),
        sigmas * math.sqrt(lam1),
        sigmas * math.sqrt(lam2),
        angle,
    )


def _capsule(members, sigmas: float) -> Ellipse:
    # fallback for collinear or tiny clusters: major axis from the spread,
    # minor axis from the mean crown radius
    xy = _coords(members)
    center = xy.mean(axis=0)
    d = xy - center
    if len(xy) > 1:
        _, s, vt = np.linalg.svd(d, full_matrices=False)
        direction = vt[0]
        spread = s[0] / math.sqrt(len(xy) - 1)
    else:
        direction, spread = np.array([1.0, 0.0]), 0.0
    crown_r = math.sqrt(float(np.mean([p.area for p in members])) / math.pi) if hasattr(members[0], "area") else 0.0
    minor = max(crown_r, 1e-9)
    major = max(sigmas * spread, minor)
    angle = _wrap_half_turn(math.atan2(direction[1], direction[0]))
    return Ellipse((float(center[0]), float(center[1])), major, minor, angle)


@dataclass
class ProtectionArea:
    id: str
    members: list
    ellipse: Ellipse

    @property
    def center(self):
        return self.ellipse.center

    def to_dict(self) -> dict:
        out = {"id": self.id, "size": len(self.members)}
        out.update(self.ellipse.as_dict())
        out["members"] = [[m.x, m.y] for m in self.members]
        return out


def protection_areas(healthy, eps: float | None = None, min_pts: int = DEFAULT_MIN_PTS) -> list[ProtectionArea]:
    """Cluster healthy trees and fit one ellipse per cluster.

    Areas are named ``PA1, PA2, ...`` by descending member count (cluster id
    breaks ties). ``eps=None`` uses :func:`default_eps`.
    """
    healthy = list(healthy)
    if not healthy:
        return []
    if eps is None:
        eps = default_eps(healthy, min_pts)
    labels = dbscan(healthy, eps, min_pts)
    groups = defaultdict(list)
    for p, lab in zip(healthy, labels):
        if lab != NOISE:
            groups[lab].append(p)
    ordered = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    out = []
    for rank, (_, members) in enumerate(ordered, start=1):
        try:
            ell = fit_ellipse(members)
        except ClusteringError:
            ell = _capsule(members, ELLIPSE_SIGMAS)
        out.append(ProtectionArea(f"PA{rank}", members, ell))
    return out
