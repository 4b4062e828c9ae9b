"""Detection evaluation: precision, recall, AP and mAP over IoU thresholds.

Matching is class-segregated, one-to-one and greedy in descending score
order. AP is the mean of the max-interpolated precision sampled at the 101
recall levels ``0.00, 0.01, ..., 1.00``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .detections import Annotation, Detection, TreeClass, iou

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = 101


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass
class MatchResult:
    det_tp: list  # bool per detection, input order
    det_gt: list  # matched ground-truth index or None, input order
    gt_matched: list  # bool per ground truth, input order

    @property
    def counts(self) -> ConfusionCounts:
        tp = sum(self.det_tp)
        return ConfusionCounts(tp, len(self.det_tp) - tp, len(self.gt_matched) - sum(self.gt_matched))


def score_order(dets) -> list[int]:
    """Indices by descending score; equal scores keep input order."""
    return sorted(range(len(dets)), key=lambda i: -dets[i].score)


def match(dets, gts, iou_thr: float) -> MatchResult:
    """Greedy one-to-one matching within each (image, class) group.

    Each detection, taken by descending score, claims the still-unmatched
    ground truth of its class with the highest IoU, provided that IoU is at
    least ``iou_thr``. IoU ties go to the lowest ground-truth index.
    """
    if not 0.0 < iou_thr <= 1.0:
        raise ValueError("iou_thr must lie in (0, 1]")
    gt_groups = defaultdict(list)
    for j, g in enumerate(gts):
        gt_groups[(g.image_id, g.cls)].append(j)

    det_gt = [None] * len(dets)
    gt_matched = [False] * len(gts)
    for i in score_order(dets):
        d = dets[i]
        best, best_iou = None, -1.0
        for j in gt_groups.get((d.image_id, d.cls), ()):
            if gt_matched[j]:
                continue
            v = iou(d.box, gts[j].box)
            if v >= iou_thr and v > best_iou:
                best, best_iou = j, v
        if best is not None:
            gt_matched[best] = True
            det_gt[i] = best
    return MatchResult([m is not None for m in det_gt], det_gt, gt_matched)


def precision_recall(c: ConfusionCounts) -> tuple[float, float]:
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    return p, r


def ap_from_flags(tp_flags, n_gt: int) -> float:
    """101-point interpolated AP from TP flags already in descending score order."""
    if n_gt == 0 or len(tp_flags) == 0:
        return 0.0
    flags = np.asarray(tp_flags, dtype=np.int64)
    ctp = np.cumsum(flags)
    cfp = np.cumsum(1 - flags)
    precision = ctp / (ctp + cfp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # recall >= k/100  <=>  100 * tp >= k * n_gt, compared in integers
    total = 0.0
    n = RECALL_POINTS - 1
    for k in range(RECALL_POINTS):
        idx = int(np.searchsorted(ctp * n, k * n_gt, side="left"))
        if idx < len(envelope):
            total += envelope[idx]
    return total / RECALL_POINTS


def average_precision(dets, gts, cls: TreeClass, iou_thr: float, matched: MatchResult | None = None) -> float:
    n_gt = sum(1 for g in gts if g.cls == cls)
    if n_gt == 0:
        return 0.0
    if matched is None:
        matched = match(dets, gts, iou_thr)
    flags = [matched.det_tp[i] for i in score_order(dets) if dets[i].cls == cls]
    return ap_from_flags(flags, n_gt)


@dataclass
class EvalReport:
    precision: float
    recall: float
    ap: dict  # (TreeClass, iou_thr) -> AP
    map50: float
    map5095: float
    counts: ConfusionCounts
    score_thr: float = 0.0
    classes_evaluated: list = field(default_factory=list)

    def to_dict(self, per_class: bool = False) -> dict:
        out = {
            "precision": self.precision,
            "recall": self.recall,
            "map50": self.map50,
            "map5095": self.map5095,
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp, "fn": self.counts.fn},
            "score_thr": self.score_thr,
            "classes_evaluated": [c.value for c in self.classes_evaluated],
        }
        summary = {}
        for cls in TreeClass:
            aps = [self.ap[(cls, t)] for t in IOU_THRESHOLDS]
            summary[cls.value] = {"ap50": aps[0], "ap5095": float(np.mean(aps))}
        out["per_class"] = summary
        if per_class:
            out["ap_table"] = {
                cls.value: {f"{t:.2f}": self.ap[(cls, t)] for t in IOU_THRESHOLDS} for cls in TreeClass
            }
        return out


def evaluate(dets, gts, score_thr: float = 0.0, thresholds=IOU_THRESHOLDS) -> EvalReport:
    """Full metric suite.

    Precision and recall pool both classes at IoU 0.5 and count only
    detections scoring at least ``score_thr``; AP always ranks every
    detection. mAP averages over the classes that have ground truth.
    """
    dets = list(dets)
    gts = list(gts)
    ap = {}
    for t in thresholds:
        m = match(dets, gts, t)
        for cls in TreeClass:
            ap[(cls, t)] = average_precision(dets, gts, cls, t, matched=m)

    present = [cls for cls in TreeClass if any(g.cls == cls for g in gts)]
    if present:
        map50 = float(np.mean([ap[(c, thresholds[0])] for c in present]))
        map5095 = float(np.mean([ap[(c, t)] for c in present for t in thresholds]))
    else:
        map50 = map5095 = 0.0

    kept = [d for d in dets if d.score >= score_thr]
    counts = match(kept, gts, 0.5).counts
    p, r = precision_recall(counts)
    return EvalReport(p, r, ap, map50, map5095, counts, score_thr, present)
