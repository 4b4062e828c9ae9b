"""Seeded synthetic forest scenes with known ground truth.

Infected trees are planted as Gaussian clusters, healthy trees as a uniform
scatter and/or Gaussian blobs. A simulated detector then drops, jitters and
adds boxes, and every realized count is recorded so downstream metrics can
be checked against it.

Randomness comes from numpy's Philox counter-based generator seeded with
``SceneSpec.seed``; draws happen in a fixed order, so a seed reproduces the
scene bit for bit on a given numpy version.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .detections import Annotation, Box, Detection, TreeClass, iou
from .fem import ngbdi, vdvi
from .metrics import ConfusionCounts
from .raster import Raster
from .situation.density import PlotExtent

MAX_ATTEMPTS = 2000
MAX_RENDER_PIXELS = 200_000_000
TP_SCORE_RANGE = (0.6, 1.0)
FP_SCORE_RANGE = (0.1, 0.7)
# Worst case for per-edge jitter j on an s x s box is all four edges pulled
# inward: IoU = (1 - 2j/s)^2, which stays above 0.5 while j < s * (1 - 1/sqrt(2)) / 2.
JITTER_FRACTION = (1.0 - math.sqrt(0.5)) / 2.0

BACKGROUND = (0.40, 0.36, 0.28)
HEALTHY_COLOR = (0.18, 0.52, 0.20)
INFECTED_COLOR = (0.66, 0.36, 0.20)


class SynthError(ValueError):
    pass


@dataclass
class ClusterSpec:
    centroid: tuple
    std: float
    count: int

    def __post_init__(self):
        self.centroid = tuple(float(c) for c in self.centroid)
        if self.std <= 0:
            raise SynthError("cluster std must be > 0")
        if self.count < 0:
            raise SynthError("cluster count must be >= 0")

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["centroid"]), float(d["std"]), int(d["count"]))

    def to_dict(self):
        return {"centroid": list(self.centroid), "std": self.std, "count": self.count}


@dataclass
class HealthySpec:
    count: int = 0  # uniformly scattered trees
    blobs: list = field(default_factory=list)

    def __post_init__(self):
        if self.count < 0:
            raise SynthError("healthy count must be >= 0")

    @property
    def total(self) -> int:
        return self.count + sum(b.count for b in self.blobs)

    @classmethod
    def from_dict(cls, d):
        return cls(int(d.get("count", 0)), [ClusterSpec.from_dict(b) for b in d.get("blobs", [])])

    def to_dict(self):
        return {"count": self.count, "blobs": [b.to_dict() for b in self.blobs]}


@dataclass
class DetectorNoise:
    miss_rate: float = 0.0
    false_rate: float = 0.0
    box_jitter: float = 0.0  # max per-edge shift, pixels
    score_model: str = "auto"  # "auto" | "ideal" | "overlap"

    def __post_init__(self):
        for name in ("miss_rate", "false_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1]")
        if self.box_jitter < 0:
            raise SynthError("box_jitter must be >= 0")
        if self.score_model not in ("auto", "ideal", "overlap"):
            raise SynthError(f"unknown score model {self.score_model!r}")

    @property
    def is_zero(self) -> bool:
        return self.miss_rate == 0 and self.false_rate == 0 and self.box_jitter == 0

    def resolved_score_model(self) -> str:
        if self.score_model == "auto":
            return "ideal" if self.is_zero else "overlap"
        return self.score_model

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d.get("miss_rate", 0.0)),
            float(d.get("false_rate", 0.0)),
            float(d.get("box_jitter", 0.0)),
            str(d.get("score_model", "auto")),
        )

    def to_dict(self):
        return {
            "miss_rate": self.miss_rate,
            "false_rate": self.false_rate,
            "box_jitter": self.box_jitter,
            "score_model": self.score_model,
        }


@dataclass
class SceneSpec:
    seed: int
    extent: PlotExtent
    clusters: list = field(default_factory=list)
    healthy: HealthySpec = field(default_factory=HealthySpec)
    crown_area_range: tuple = (400.0, 900.0)
    detector_noise: DetectorNoise = field(default_factory=DetectorNoise)
    # crown areas for infected trees; defaults to crown_area_range
    infected_crown_area_range: tuple | None = None
    min_spacing: float = 0.0
    image_id: str = "scene"

    def __post_init__(self):
        lo, hi = self.crown_area_range
        if not 0 < lo <= hi:
            raise SynthError("crown_area_range must satisfy 0 < min <= max")
        if self.infected_crown_area_range is not None:
            ilo, ihi = self.infected_crown_area_range
            if not 0 < ilo <= ihi:
                raise SynthError("infected_crown_area_range must satisfy 0 < min <= max")
        if self.min_spacing < 0:
            raise SynthError("min_spacing must be >= 0")

    @property
    def infected_areas(self) -> tuple:
        return self.infected_crown_area_range or self.crown_area_range

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        try:
            return cls(
                seed=int(d["seed"]),
                extent=PlotExtent(*d["extent"]),
                clusters=[ClusterSpec.from_dict(c) for c in d.get("clusters", [])],
                healthy=HealthySpec.from_dict(d.get("healthy", {})),
                crown_area_range=tuple(d.get("crown_area_range", (400.0, 900.0))),
                detector_noise=DetectorNoise.from_dict(d.get("detector_noise", {})),
                infected_crown_area_range=(
                    tuple(d["infected_crown_area_range"]) if d.get("infected_crown_area_range") else None
                ),
                min_spacing=float(d.get("min_spacing", 0.0)),
                image_id=str(d.get("image_id", "scene")),
            )
        except (KeyError, TypeError) as exc:
            raise SynthError(f"malformed scene spec: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "extent": self.extent.as_list(),
            "clusters": [c.to_dict() for c in self.clusters],
            "healthy": self.healthy.to_dict(),
            "crown_area_range": list(self.crown_area_range),
            "detector_noise": self.detector_noise.to_dict(),
            "infected_crown_area_range": list(self.infected_crown_area_range) if self.infected_crown_area_range else None,
            "min_spacing": self.min_spacing,
            "image_id": self.image_id,
        }


@dataclass
class SceneTruth:
    annotations: list
    detections: list
    expected: dict

    @property
    def counts(self) -> ConfusionCounts:
        c = self.expected["counts"]
        return ConfusionCounts(c["tp"], c["fp"], c["fn"])

    def to_dict(self) -> dict:
        return dict(self.expected)


class _Placer:
    """Rejection sampler enforcing the extent and a minimum center spacing."""

    def __init__(self, extent: PlotExtent, min_spacing: float):
        self.extent = extent
        self.min_spacing = min_spacing
        self.cell = min_spacing if min_spacing > 0 else None
        self.grid = defaultdict(list)

    def _key(self, x, y):
        return (int(math.floor(x / self.cell)), int(math.floor(y / self.cell)))

    def fits(self, x: float, y: float, half: float) -> bool:
        e = self.extent
        if not (e.x_min + half <= x <= e.x_max - half and e.y_min + half <= y <= e.y_max - half):
            return False
        if self.cell is None:
            return True
        kx, ky = self._key(x, y)
        s2 = self.min_spacing * self.min_spacing
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for px, py in self.grid.get((kx + dx, ky + dy), ()):
                    if (px - x) ** 2 + (py - y) ** 2 < s2:
                        return False
        return True

    def add(self, x: float, y: float) -> None:
        if self.cell is not None:
            self.grid[self._key(x, y)].append((x, y))


def _check_feasible(spec: SceneSpec) -> None:
    e = spec.extent
    n_inf = sum(c.count for c in spec.clusters)
    n_healthy = spec.healthy.total
    plot_area = e.width * e.height
    crown_area = n_inf * spec.infected_areas[0] + n_healthy * spec.crown_area_range[0]
    if crown_area > plot_area:
        raise SynthError(
            f"infeasible spec: {n_inf + n_healthy} trees need at least {crown_area:g} px^2, extent holds {plot_area:g}"
        )
    if spec.min_spacing > 0:
        # hexagonal packing of discs of diameter min_spacing
        capacity = plot_area / (math.sqrt(3) / 2 * spec.min_spacing**2)
        if n_inf + n_healthy > capacity:
            raise SynthError(
                f"infeasible spec: {n_inf + n_healthy} trees cannot keep spacing {spec.min_spacing:g} "
                f"inside the extent (capacity ~{int(capacity)})"
            )
    if max(spec.crown_area_range[1], spec.infected_areas[1]) ** 0.5 > min(e.width, e.height):
        raise SynthError("infeasible spec: largest crown does not fit inside the extent")


def _place_trees(rng, placer, n, area_range, draw_center, cls, image_id, what):
    out = []
    for _ in range(n):
        for _attempt in range(MAX_ATTEMPTS):
            area = rng.uniform(*area_range) if area_range[1] > area_range[0] else float(area_range[0])
            side = math.sqrt(area)
            x, y = draw_center()
            if placer.fits(x, y, side / 2.0):
                placer.add(x, y)
                box = Box(x - side / 2.0, y - side / 2.0, x + side / 2.0, y + side / 2.0)
                out.append(Annotation(image_id, box, cls))
                break
        else:
            raise SynthError(f"infeasible spec: could not place a {what} tree after {MAX_ATTEMPTS} attempts")
    return out


def generate(spec: SceneSpec) -> SceneTruth:
    """Draw one scene and its simulated detections."""
    _check_feasible(spec)
    noise = spec.detector_noise
    s_min = math.sqrt(min(spec.crown_area_range[0], spec.infected_areas[0]))
    if noise.box_jitter > 0 and noise.box_jitter >= JITTER_FRACTION * s_min:
        raise SynthError(
            f"box_jitter {noise.box_jitter:g} too large: must stay below {JITTER_FRACTION * s_min:.6g} px "
            "so jittered boxes keep IoU > 0.5 with their source"
        )

    rng = np.random.Generator(np.random.Philox(spec.seed))
    e = spec.extent
    placer = _Placer(e, spec.min_spacing)

    annotations = []
    for c in spec.clusters:
        cx, cy = c.centroid
        annotations += _place_trees(
            rng, placer, c.count, spec.infected_areas,
            lambda: (rng.normal(cx, c.std), rng.normal(cy, c.std)),
            TreeClass.INFECTED, spec.image_id, "infected",
        )
    for b in spec.healthy.blobs:
        bx, by = b.centroid
        annotations += _place_trees(
            rng, placer, b.count, spec.crown_area_range,
            lambda: (rng.normal(bx, b.std), rng.normal(by, b.std)),
            TreeClass.HEALTHY, spec.image_id, "healthy",
        )
    annotations += _place_trees(
        rng, placer, spec.healthy.count, spec.crown_area_range,
        lambda: (rng.uniform(e.x_min, e.x_max), rng.uniform(e.y_min, e.y_max)),
        TreeClass.HEALTHY, spec.image_id, "healthy",
    )

    detections, counts = _simulate_detector(rng, spec, annotations)
    expected = {
        "seed": spec.seed,
        "image_id": spec.image_id,
        "cluster_centroids": [list(c.centroid) for c in spec.clusters if c.count > 0],
        "blob_centroids": [list(b.centroid) for b in spec.healthy.blobs if b.count > 0],
        "n_infected": sum(1 for a in annotations if a.cls == TreeClass.INFECTED),
        "n_healthy": sum(1 for a in annotations if a.cls == TreeClass.HEALTHY),
        "counts": {"tp": counts.tp, "fp": counts.fp, "fn": counts.fn},
        "score_model": noise.resolved_score_model(),
        "spec": spec.to_dict(),
    }
    return SceneTruth(annotations, detections, expected)


def _simulate_detector(rng, spec: SceneSpec, annotations):
    noise = spec.detector_noise
    ideal = noise.resolved_score_model() == "ideal"
    detections = []
    tp = fn = 0
    for a in annotations:
        if noise.miss_rate > 0 and rng.random() < noise.miss_rate:
            fn += 1
            continue
        box = a.box
        if noise.box_jitter > 0:
            j = rng.uniform(-noise.box_jitter, noise.box_jitter, size=4)
            box = Box(box.x_min + j[0], box.y_min + j[1], box.x_max + j[2], box.y_max + j[3])
        score = 1.0 if ideal else float(rng.uniform(*TP_SCORE_RANGE))
        detections.append(Detection(a.image_id, box, a.cls, score))
        tp += 1

    n_false = int((rng.random(len(annotations)) < noise.false_rate).sum()) if noise.false_rate > 0 else 0
    e = spec.extent
    lo, hi = spec.crown_area_range
    for _ in range(n_false):
        for _attempt in range(MAX_ATTEMPTS):
            side = math.sqrt(rng.uniform(lo, hi)) if hi > lo else math.sqrt(lo)
            x = rng.uniform(e.x_min + side / 2, e.x_max - side / 2)
            y = rng.uniform(e.y_min + side / 2, e.y_max - side / 2)
            box = Box(x - side / 2, y - side / 2, x + side / 2, y + side / 2)
            if all(iou(box, a.box) < 0.5 for a in annotations):
                break
        else:
            raise SynthError("infeasible spec: no room for a false detection clear of every tree")
        cls = TreeClass.INFECTED if rng.random() < 0.5 else TreeClass.HEALTHY
        score = 1.0 if ideal else float(rng.uniform(*FP_SCORE_RANGE))
        detections.append(Detection(spec.image_id, box, cls, score))
    return detections, ConfusionCounts(tp, n_false, fn)


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------


def render(truth: SceneTruth, ppm: float = 1.0) -> Raster:
    """Paint ground-truth crowns as shaded discs on a soil background.

    Healthy crowns are green-dominant and infected crowns red/brown, so at a
    crown center VDVI is positive for healthy and negative for infected trees
    (checked after painting).
    """
    if ppm <= 0:
        raise SynthError("pixels-per-unit must be > 0")
    ext = PlotExtent(*truth.expected["spec"]["extent"])
    w = int(math.ceil(ext.width * ppm))
    h = int(math.ceil(ext.height * ppm))
    if w * h > MAX_RENDER_PIXELS:
        raise SynthError(f"render of {w}x{h} pixels exceeds the {MAX_RENDER_PIXELS} pixel limit")
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = BACKGROUND
    owner = np.full((h, w), -1, dtype=np.int64)

    for idx, a in enumerate(truth.annotations):
        cx, cy = a.box.center
        px = (cx - ext.x_min) * ppm
        py = (cy - ext.y_min) * ppm
        radius = math.sqrt(a.box.area / math.pi) * ppm
        x0, x1 = max(int(px - radius), 0), min(int(px + radius) + 1, w)
        y0, y1 = max(int(py - radius), 0), min(int(py + radius) + 1, h)
        if x0 >= x1 or y0 >= y1:
            continue
        xx, yy = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
        r2 = ((xx - px) ** 2 + (yy - py) ** 2) / max(radius * radius, 1e-12)
        disc = r2 <= 1.0
        # the pixel holding the crown center is always painted
        ci, cj = min(int(py), h - 1), min(int(px), w - 1)
        if y0 <= ci < y1 and x0 <= cj < x1:
            disc[ci - y0, cj - x0] = True
        color = np.array(HEALTHY_COLOR if a.cls == TreeClass.HEALTHY else INFECTED_COLOR)
        shade = 1.0 - 0.3 * np.clip(r2, 0.0, 1.0)
        patch = img[y0:y1, x0:x1]
        patch[disc] = shade[disc][:, None] * color
        owner[y0:y1, x0:x1][disc] = idx

    raster = Raster(img)
    _check_palette(truth, raster, owner, ext, ppm)
    return raster


def _check_palette(truth, raster, owner, ext, ppm) -> None:
    v = vdvi(raster)
    n = ngbdi(raster)
    h, w = owner.shape
    for idx, a in enumerate(truth.annotations):
        cx, cy = a.box.center
        i = min(int((cy - ext.y_min) * ppm), h - 1)
        j = min(int((cx - ext.x_min) * ppm), w - 1)
        if owner[i, j] != idx:
            continue  # center hidden under a later crown
        if a.cls == TreeClass.HEALTHY and not (v[i, j] > 0 and n[i, j] > 0):
            raise SynthError(f"healthy crown {idx} rendered without positive VDVI/NGBDI")
        if a.cls == TreeClass.INFECTED and not v[i, j] < 0:
            raise SynthError(f"infected crown {idx} rendered without negative VDVI")
