"""Affine score calibration onto the root detector's scale.

The map sends the 5th/95th percentiles of a support detector's scores onto
the 5th/95th percentiles of the root detector's scores. Scores outside the
fitted range are extrapolated linearly, so ranking is preserved everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from csbc.errors import DegenerateDistributionError

LOW_PERCENTILE = 5.0
HIGH_PERCENTILE = 95.0


@dataclass(frozen=True)
class CalibrationMap:
    source_detector_id: str
    slope: float
    intercept: float
    source_range: tuple[float, float]

    def __post_init__(self):
        if not self.slope > 0 or not np.isfinite(self.slope):
            raise ValueError(f"calibration slope must be finite and positive, got {self.slope!r}")
        if not np.isfinite(self.intercept):
            raise ValueError("calibration intercept must be finite")

    def __call__(self, score: float) -> float:
        return self.slope * score + self.intercept

    @classmethod
    def identity(cls, detector_id: str) -> CalibrationMap:
        return cls(detector_id, 1.0, 0.0, (0.0, 0.0))


def _anchors(scores, what: str) -> tuple[float, float]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    if np.unique(s).size < 2:
        raise DegenerateDistributionError(f"{what} scores need at least 2 distinct values")
    lo, hi = np.percentile(s, [LOW_PERCENTILE, HIGH_PERCENTILE])
    if hi <= lo:
        raise DegenerateDistributionError(
            f"{what} scores have equal {LOW_PERCENTILE:g}th and {HIGH_PERCENTILE:g}th percentiles"
        )
    return float(lo), float(hi)


def fit_calibration(source_scores, reference_scores, source_detector_id: str = "source") -> CalibrationMap:
    s05, s95 = _anchors(source_scores, "source")
    r05, r95 = _anchors(reference_scores, "reference")
    slope = (r95 - r05) / (s95 - s05)
    intercept = r05 - slope * s05
    src = np.asarray(source_scores, dtype=np.float64)
    return CalibrationMap(source_detector_id, slope, intercept, (float(src.min()), float(src.max())))


def apply(cal: CalibrationMap, score: float) -> float:
    return cal.slope * score + cal.intercept
