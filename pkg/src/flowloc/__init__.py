"""Motion-aware sound source localization toolkit.

Dense optical flow, semantic/motion heatmap fusion, detection-box filtering
and cIoU/AUC scoring, plus a synthetic scene generator for end-to-end checks.
"""
from .boxes import BBox, BoxSet, boxes_to_mask, class_filter, mask_to_heatmap, stationarity_filter
from .core import (
    FlowField,
    Frame,
    Heatmap,
    Mask,
    Pyramid,
    build_pyramid,
    downsample,
    gaussian_blur,
    iou_boxes,
)
from .errors import (
    FlowlocError,
    FormatError,
    InvalidInputError,
    InvalidParameterError,
    InvalidScenarioError,
    LevelTooSmallError,
    PairingError,
    ParseError,
)
from .flow import (
    FlowParams,
    PolyExpansion,
    aggregate_flow,
    displacement_step,
    farneback_flow,
    flow_magnitude,
    poly_expand,
)
from .fusion import binarize, flowgrad_h, fuse_multiply, minmax_normalize
from .metrics import EvalConfig, EvalReport, evaluate, frame_iou
from .synth import Actor, Scenario, canonical_scenario, render, semantic_oracle

__version__ = "0.1.0"
