"""Localization scoring: per-frame IoU, consensus IoU and threshold AUC."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import boxes_to_mask, sounding_only
from .core import Heatmap, Mask
from .errors import InvalidInputError, InvalidParameterError
from .fusion import binarize

AGGREGATES = ("mean-iou", "success-ratio")


def default_auc_taus(step: float = 0.05) -> tuple[float, ...]:
    n = int(round(1.0 / step))
    return tuple(round(k * step, 10) for k in range(1, n))


@dataclass(frozen=True)
class EvalConfig:
    tau: float = 0.5
    auc_taus: tuple = field(default_factory=default_auc_taus)
    aggregate: str = "mean-iou"
    success_cutoff: float = 0.5

    def __post_init__(self):
        taus = tuple(float(t) for t in self.auc_taus)
        object.__setattr__(self, "auc_taus", taus)
        if not taus:
            raise InvalidParameterError("auc_taus must not be empty")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise InvalidParameterError("auc_taus must be strictly increasing")
        if any(not 0.0 <= t <= 1.0 for t in taus + (self.tau, self.success_cutoff)):
            raise InvalidParameterError("thresholds must lie in [0, 1]")
        if self.aggregate not in AGGREGATES:
            raise InvalidParameterError(f"aggregate must be one of {AGGREGATES}, got {self.aggregate!r}")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "auc_taus": list(self.auc_taus),
            "aggregate": self.aggregate,
            "success_cutoff": self.success_cutoff,
        }

    @classmethod
    def from_dict(cls, d) -> "EvalConfig":
        return cls(d["tau"], tuple(d["auc_taus"]), d["aggregate"], d["success_cutoff"])


@dataclass(frozen=True)
class EvalReport:
    per_frame: list
    ciou: float
    auc: float
    n_frames: int
    config: EvalConfig = field(default_factory=EvalConfig)
    curve: list = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "per_frame", [(int(i), float(v)) for i, v in self.per_frame])
        object.__setattr__(self, "curve", [(float(t), float(v)) for t, v in self.curve])
        if self.n_frames != len(self.per_frame):
            raise InvalidInputError("n_frames does not match the per-frame list")


def mask_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def frame_iou(pred: Heatmap, gt: Mask, tau: float = 0.5) -> float:
    """IoU of the thresholded prediction against the ground-truth mask.

    Two empty masks score 1.0; exactly one empty mask scores 0.0.
    """
    if pred.shape != gt.shape:
        raise InvalidInputError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    return mask_iou(binarize(pred, tau).bits, gt.bits)


def _aggregate(ious, config):
    ious = np.asarray(ious, dtype=np.float64)
    if config.aggregate == "mean-iou":
        # fsum is exactly rounded, so frame order cannot change the result
        return math.fsum(ious) / ious.size
    return float(np.count_nonzero(ious > config.success_cutoff) / ious.size)


def trapezoid_auc(taus, values) -> float:
    """Trapezoid integral divided by the grid span; a single point returns its value."""
    taus = np.asarray(taus, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if taus.size == 1:
        return float(values[0])
    area = np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(taus))
    return float(area / (taus[-1] - taus[0]))


def evaluate(preds, gts, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Score normalized localization maps against per-frame ground-truth boxes.

    Only boxes whose ``sounding`` flag is not False enter the ground-truth
    mask. Predictions are matched to ``gts`` by position.
    """
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts):
        raise InvalidInputError(f"{len(preds)} predictions but {len(gts)} ground-truth frames")
    if not preds:
        raise InvalidInputError("empty evaluation set")

    masks = []
    for p, g in zip(preds, gts):
        if p.values.min() < 0.0 or p.values.max() > 1.0:
            raise InvalidInputError(f"prediction for frame {g.frame_index} is not normalized to [0, 1]")
        masks.append(boxes_to_mask(sounding_only(g), p.width, p.height).bits)

    def ious_at(tau):
        return [mask_iou(binarize(p, tau).bits, m) for p, m in zip(preds, masks)]

    at_tau = ious_at(config.tau)
    curve = [(t, _aggregate(ious_at(t), config)) for t in config.auc_taus]
    auc = trapezoid_auc([t for t, _ in curve], [v for _, v in curve])
    return EvalReport(
        per_frame=[(g.frame_index, v) for g, v in zip(gts, at_tau)],
        ciou=_aggregate(at_tau, config),
        auc=auc,
        n_frames=len(preds),
        config=config,
        curve=curve,
    )
