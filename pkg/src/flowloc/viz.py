"""Static overlay images: frame, prediction contour and ground-truth boxes."""
from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage

from .boxes import boxes_to_mask, sounding_only
from .fusion import binarize

PRED_COLOR = (255, 40, 40)
GT_COLOR = (40, 220, 40)


def _outline(bits):
    return bits & ~ndimage.binary_erosion(bits, border_value=0)


def overlay_image(background, prediction, gt_boxes, tau=0.5) -> Image.Image:
    """RGB image with the thresholded prediction outlined in red and sounding boxes in green."""
    background = getattr(background, "pixels", background)
    gray = np.clip(np.round(np.asarray(background) * 255), 0, 255).astype(np.uint8)
    rgb = np.repeat(gray[..., None], 3, axis=2)
    h, w = gray.shape
    for box in sounding_only(gt_boxes):
        rgb[_outline(boxes_to_mask([box], w, h).bits)] = GT_COLOR
    rgb[_outline(binarize(prediction, tau).bits)] = PRED_COLOR
    return Image.fromarray(rgb, mode="RGB")
