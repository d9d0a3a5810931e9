"""Axis-aligned bounding boxes and the two overlap ratios used for merging."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    """Pixel rectangle given by its top-left corner and size.

    Boxes with non-positive width or height are rejected on construction.
    """

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("left", "top", "width", "height"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box {name} must be finite, got {getattr(self, name)!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"box size must be positive, got {self.width}x{self.height}")

    @classmethod
    def from_center(cls, cx, cy, width, height):
        return cls(float(cx) - width / 2.0, float(cy) - height / 2.0, float(width), float(height))

    @property
    def right(self):
        return self.left + self.width

    @property
    def bottom(self):
        return self.top + self.height

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)

    def as_tuple(self):
        return (self.left, self.top, self.width, self.height)

    def scaled(self, factor):
        return BoundingBox(self.left * factor, self.top * factor,
                           self.width * factor, self.height * factor)


def _span(lo_a, len_a, lo_b, len_b):
    hi_a, hi_b = lo_a + len_a, lo_b + len_b
    # A nested interval contributes its own length, which keeps the
    # overlap of a box with itself exactly equal to its area.
    if lo_a >= lo_b and hi_a <= hi_b:
        return len_a
    if lo_b >= lo_a and hi_b <= hi_a:
        return len_b
    return min(hi_a, hi_b) - max(lo_a, lo_b)


def _overlap(a: BoundingBox, b: BoundingBox):
    iw = _span(a.left, a.width, b.left, b.width)
    ih = _span(a.top, a.height, b.top, b.height)
    if iw <= 0 or ih <= 0:
        return 0.0
    # Rounding in right/bottom can push the product past the smaller area.
    return min(iw * ih, a.area, b.area)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Area shared by ``a`` and ``b`` (0 when they do not overlap)."""
    return _overlap(a, b)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union."""
    inter = _overlap(a, b)
    if inter == 0.0:
        return 0.0
    big, small = (a.area, b.area) if a.area >= b.area else (b.area, a.area)
    # big + (small - inter) keeps union >= each area in floating point,
    # which is what guarantees iou <= sioa without tolerance.
    union = big + (small - inter)
    return inter / union


def sioa(a: BoundingBox, b: BoundingBox) -> float:
    """Sum of intersection over area: mean of the overlap fraction of each box.

    Unlike IOU this stays high when a small box sits inside a large one.
    """
    inter = _overlap(a, b)
    if inter == 0.0:
        return 0.0
    return 0.5 * (inter / a.area + inter / b.area)


def overlap_ratio(a: BoundingBox, b: BoundingBox, metric: str = "sioa") -> float:
    if metric == "sioa":
        return sioa(a, b)
    if metric == "iou":
        return iou(a, b)
    raise ValueError(f"unknown overlap metric {metric!r}")
