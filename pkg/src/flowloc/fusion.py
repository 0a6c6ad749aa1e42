"""Heatmap algebra: normalization, multiplicative fusion and thresholding."""
from __future__ import annotations

import math

import numpy as np

from .core import FlowField, Heatmap, Mask
from .errors import InvalidInputError, InvalidParameterError
from .flow import flow_magnitude


def _normalize_values(values):
    lo = values.min()
    hi = values.max()
    if hi == lo:
        # a flat map carries no localization evidence
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def minmax_normalize(heatmap: Heatmap) -> Heatmap:
    """Affinely rescale to span [0, 1]; constant maps become all zeros."""
    vals = np.asarray(heatmap.values, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("cannot normalize a map with non-finite values")
    return Heatmap(_normalize_values(vals))


def _fusion_factor(heatmap):
    vals = np.asarray(heatmap.values, dtype=np.float64)
    if vals.min() == vals.max():
        # flat inputs keep their level: all-ones is neutral, all-zeros annihilates
        return np.clip(vals, 0.0, 1.0)
    return minmax_normalize(heatmap).values


def fuse_multiply(maps) -> Heatmap:
    """Normalize each map, multiply pointwise, renormalize the product.

    A constant input enters the product as its value clipped to [0, 1]
    instead of being normalized to zeros.
    """
    maps = list(maps)
    if not maps:
        raise InvalidInputError("fuse_multiply needs at least one map")
    shape = maps[0].shape
    for m in maps:
        if m.shape != shape:
            raise InvalidInputError(f"heatmap shapes differ: {shape} vs {m.shape}")
    normed = [_fusion_factor(m) for m in maps]
    # sorting the factors per pixel makes the product order-independent bit for bit
    stacked = np.sort(np.stack(normed), axis=0)
    product = np.prod(stacked, axis=0)
    return Heatmap(_normalize_values(product))


def binarize(heatmap: Heatmap, tau: float) -> Mask:
    if not (math.isfinite(tau) and 0.0 <= tau <= 1.0):
        raise InvalidParameterError(f"tau must lie in [0, 1], got {tau!r}")
    return Mask(heatmap.values > tau)


def flowgrad_h(semantic: Heatmap, flow: FlowField | Heatmap) -> Heatmap:
    """Suppress semantic activations on pixels that do not move.

    ``flow`` may be a flow field or an already-computed (e.g. temporally
    aggregated) magnitude map.
    """
    motion = flow_magnitude(flow) if isinstance(flow, FlowField) else flow
    # normalize first so uniform motion (no evidence) suppresses everything
    return fuse_multiply([semantic, minmax_normalize(motion)])
