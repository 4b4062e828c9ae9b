"""infestscope: forest-infestation analytics from RGB UAV imagery and tree detections."""

from .detections import Annotation, Box, Detection, TreeClass, TreePoint, iou, to_points
from .raster import Raster, load_image, save_image, tile, untile

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "Box",
    "Detection",
    "Raster",
    "TreeClass",
    "TreePoint",
    "iou",
    "load_image",
    "save_image",
    "tile",
    "to_points",
    "untile",
]
