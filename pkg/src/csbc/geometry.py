"""Axis-aligned box algebra: Jaccard overlap and greedy NMS."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TypeVar

from csbc.errors import ConfigurationError


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Rectangle ``(x, y, w, h)`` in pixels; ``(x, y)`` is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"box {name} must be finite, got {v!r}")
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive size, got w={self.w!r} h={self.h!r}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + 0.5 * self.w, self.y + 0.5 * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.w, self.h


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    # half-open intervals: touching edges give zero
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def jaccard(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, in ``[0, 1]``."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    # areas from the same corner differences as the intersection, so that
    # jaccard(a, a) is exactly 1
    area_a = (a.x2 - a.x) * (a.y2 - a.y)
    area_b = (b.x2 - b.x) * (b.y2 - b.y)
    return min(1.0, inter / (area_a + area_b - inter))


T = TypeVar("T")


def greedy_nms(dets: Sequence[T], overlap_threshold: float) -> list[T]:
    """Classic greedy non-maximum suppression.

    ``dets`` are objects with ``bbox`` and ``score`` attributes, all from one
    detector and frame. Boxes whose Jaccard with an already kept box is at
    least ``overlap_threshold`` are dropped. Score ties keep input order.
    """
    if not 0.0 <= overlap_threshold <= 1.0:
        raise ConfigurationError(f"overlap_threshold must be in [0, 1], got {overlap_threshold}")
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    kept: list[T] = []
    for i in order:
        d = dets[i]
        if all(jaccard(d.bbox, k.bbox) < overlap_threshold for k in kept):
            kept.append(d)
    return kept
