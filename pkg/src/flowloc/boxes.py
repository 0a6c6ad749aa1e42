"""Detection-box post-processing: class filtering, stationarity filtering,
and rasterization into masks for scoring.

Boxes are half-open pixel rectangles ``[x, x+w) x [y, y+h)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Heatmap, Mask, iou_boxes
from .errors import InvalidInputError

VEHICLE_CLASSES = frozenset({"car", "motorcycle", "bus", "truck"})
STATIONARY_IOU = 0.95


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float
    class_label: str = "car"
    frame_index: int = 0
    sounding: bool | None = None
    confidence: float | None = None

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"box {name} must be finite")
        if self.w < 0 or self.h < 0:
            raise InvalidInputError(f"negative box extent ({self.w}, {self.h})")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class BoxSet:
    frame_index: int
    boxes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        boxes = tuple(self.boxes)
        for b in boxes:
            if b.frame_index != self.frame_index:
                raise InvalidInputError(
                    f"box from frame {b.frame_index} placed in set for frame {self.frame_index}"
                )
        object.__setattr__(self, "boxes", boxes)

    def __len__(self):
        return len(self.boxes)

    def __iter__(self):
        return iter(self.boxes)


def class_filter(boxset: BoxSet, allowed=VEHICLE_CLASSES) -> BoxSet:
    allowed = frozenset(allowed)
    return BoxSet(boxset.frame_index, tuple(b for b in boxset.boxes if b.class_label in allowed))


def stationarity_filter(frames, iou_threshold: float = STATIONARY_IOU) -> list[BoxSet]:
    """Drop boxes that barely move between consecutive frames.

    For every consecutive pair, any box pair with IoU above the threshold
    marks both boxes; marks accumulate over all pairs.
    """
    frames = list(frames)
    for prev, cur in zip(frames, frames[1:]):
        if cur.frame_index != prev.frame_index + 1:
            raise InvalidInputError(
                f"frame indices must be consecutive, got {prev.frame_index} then {cur.frame_index}"
            )
    discard = [set() for _ in frames]
    for k in range(len(frames) - 1):
        for i, a in enumerate(frames[k].boxes):
            for j, b in enumerate(frames[k + 1].boxes):
                if iou_boxes(a, b) > iou_threshold:
                    discard[k].add(i)
                    discard[k + 1].add(j)
    return [
        BoxSet(fs.frame_index, tuple(b for i, b in enumerate(fs.boxes) if i not in discard[k]))
        for k, fs in enumerate(frames)
    ]


def _pixel_span(start, extent, limit):
    # pixel i is covered when its centre i + 0.5 falls in [start, start + extent)
    lo = math.ceil(start - 0.5)
    hi = math.ceil(start + extent - 0.5)
    return max(0, lo), min(limit, hi)


def boxes_to_mask(boxset, width: int, height: int) -> Mask:
    bits = np.zeros((height, width), dtype=bool)
    for b in boxset:
        x0, x1 = _pixel_span(b.x, b.w, width)
        y0, y1 = _pixel_span(b.y, b.h, height)
        if x1 > x0 and y1 > y0:
            bits[y0:y1, x0:x1] = True
    return Mask(bits)


def mask_to_heatmap(mask: Mask) -> Heatmap:
    return Heatmap(mask.bits.astype(np.float64))


def sounding_only(boxset: BoxSet) -> BoxSet:
    """Keep ground-truth boxes flagged as sounding; unflagged boxes count as sounding."""
    return replace(boxset, boxes=tuple(b for b in boxset.boxes if b.sounding is not False))
