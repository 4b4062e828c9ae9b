"""Pest-situation analytics over tree detections."""

from .clustering import (
    NOISE,
    ClusteringError,
    Ellipse,
    ProtectionArea,
    dbscan,
    default_eps,
    fit_ellipse,
    protection_areas,
)
from .density import (
    DensityError,
    DensityField,
    PlotExtent,
    bandwidth,
    density_at,
    find_peaks,
    kde,
    sample_density,
)
from .risk import RiskTable, risk_scores
from .sizeclass import SizeClassStats, size_class_stats

__all__ = [
    "NOISE",
    "ClusteringError",
    "DensityError",
    "DensityField",
    "Ellipse",
    "PlotExtent",
    "ProtectionArea",
    "RiskTable",
    "SizeClassStats",
    "bandwidth",
    "dbscan",
    "default_eps",
    "density_at",
    "find_peaks",
    "fit_ellipse",
    "kde",
    "protection_areas",
    "risk_scores",
    "sample_density",
    "size_class_stats",
]
