"""Crown-size classes (small / medium / large) and infection share per class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..detections import TreeClass

SIZE_CLASSES = ("small", "medium", "large")


@dataclass
class SizeClassStats:
    boundaries: tuple  # (b1, b2) in pixels^2
    per_class: dict  # name -> {"total", "infected", "healthy", "infected_fraction"}
    method: str = "equal_width"
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "boundaries": list(self.boundaries),
            "classes": self.per_class,
            "method": self.method,
            "degenerate": self.degenerate,
        }


def classify_areas(areas, b1: float, b2: float) -> list[str]:
    """small: ``[a_min, b1)``, medium: ``[b1, b2)``, large: ``[b2, a_max]``."""
    return ["small" if a < b1 else "medium" if a < b2 else "large" for a in areas]


def size_class_stats(trees, tertiles: bool = False) -> SizeClassStats:
    """Split trees into three crown-area classes and count infection per class.

    By default the area range is cut into three equal-width intervals;
    ``tertiles=True`` cuts at the 1/3 and 2/3 quantiles instead. When every
    tree has the same area the boundaries coincide, every tree lands in
    ``large`` and the result is flagged ``degenerate``.
    """
    trees = list(trees)
    if not trees:
        raise ValueError("size_class_stats needs at least one tree")
    areas = np.array([t.area for t in trees], dtype=np.float64)
    lo, hi = float(areas.min()), float(areas.max())
    if tertiles:
        b1, b2 = (float(q) for q in np.quantile(areas, [1.0 / 3.0, 2.0 / 3.0]))
        method = "tertiles"
    else:
        b1 = lo + (hi - lo) / 3.0
        b2 = lo + 2.0 * (hi - lo) / 3.0
        method = "equal_width"

    labels = classify_areas(areas, b1, b2)
    per_class = {name: {"total": 0, "infected": 0, "healthy": 0} for name in SIZE_CLASSES}
    for t, lab in zip(trees, labels):
        bucket = per_class[lab]
        bucket["total"] += 1
        bucket["infected" if t.cls == TreeClass.INFECTED else "healthy"] += 1
    for bucket in per_class.values():
        bucket["infected_fraction"] = bucket["infected"] / bucket["total"] if bucket["total"] else 0.0
    return SizeClassStats((b1, b2), per_class, method, degenerate=not b1 < b2)
