"""Content-based late fusion of object detectors.

Root-detector windows are re-scored from the spatial support of other
detectors; in content-based mode each supporting term is weighted by a
per-detector PLS model of the support window's appearance.
"""

from csbc.errors import CsbcError
from csbc.geometry import BoundingBox, greedy_nms, jaccard
from csbc.model_io import Detection, DetectionSet, GroundTruthBox

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CsbcError",
    "Detection",
    "DetectionSet",
    "GroundTruthBox",
    "greedy_nms",
    "jaccard",
]
