"""Grid types and the low-level image kernels everything else is built on.

All grids are stored as 2-D numpy arrays indexed ``[row, column]``; the
``width``/``height`` properties exist for readability at call sites.
Values are made read-only on construction so instances can be shared freely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError, InvalidParameterError, LevelTooSmallError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
MIN_PYRAMID_DIM = 16


def _frozen(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype, copy=True)
    if out.ndim != 2:
        raise InvalidInputError(f"expected a 2-D grid, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise InvalidInputError(f"grid must be at least 1x1, got shape {out.shape}")
    out.setflags(write=False)
    return out


class _Grid:
    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def width(self) -> int:
        return self._data.shape[1]


@dataclass(frozen=True, eq=False)
class Frame(_Grid):
    """Single-channel intensity image with values in [0, 1]."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self):
        px = _frozen(self.pixels)
        if not np.all(np.isfinite(px)):
            raise InvalidInputError("frame intensities must be finite")
        if px.min() < 0.0 or px.max() > 1.0:
            raise InvalidInputError("frame intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "index", int(self.index))

    @property
    def _data(self):
        return self.pixels


@dataclass(frozen=True, eq=False)
class Heatmap(_Grid):
    """Per-pixel scalar activation map."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("heatmap values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def _data(self):
        return self.values


@dataclass(frozen=True, eq=False)
class Mask(_Grid):
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _frozen(self.bits, dtype=bool))

    @property
    def _data(self):
        return self.bits

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass(frozen=True, eq=False)
class FlowField(_Grid):
    """Dense displacement field; ``u`` is horizontal, ``v`` vertical, in px/frame."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u, v = _frozen(self.u), _frozen(self.v)
        if u.shape != v.shape:
            raise InvalidInputError(f"u and v shapes differ: {u.shape} vs {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise InvalidInputError("flow components must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def _data(self):
        return self.u

    @classmethod
    def zeros(cls, shape) -> "FlowField":
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass(frozen=True)
class Pyramid:
    levels: list = field(default_factory=list)
    scale: float = 0.5

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k) -> Frame:
        return self.levels[k]


def to_grayscale(rgb) -> np.ndarray:
    """Luma-weighted grayscale of an ``(H, W, 3)`` array (alpha channel ignored)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim == 2:
        return rgb
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise InvalidInputError(f"cannot convert shape {rgb.shape} to grayscale")
    r, g, b = LUMA_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def _check_sigma(sigma):
    if not (isinstance(sigma, (int, float, np.floating)) and math.isfinite(sigma) and sigma > 0):
        raise InvalidParameterError(f"sigma must be a positive finite real, got {sigma!r}")


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """Normalized 1-D Gaussian taps; radius defaults to ``ceil(3*sigma)``."""
    _check_sigma(sigma)
    if radius is None:
        radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    assert abs(k.sum() - 1.0) < 1e-12
    return k


def separable_correlate(arr: np.ndarray, row_taps: np.ndarray, col_taps: np.ndarray) -> np.ndarray:
    """Correlate along columns (x) with ``col_taps`` and rows (y) with ``row_taps``.

    Borders use edge replication.
    """
    out = ndimage.correlate1d(arr, col_taps, axis=1, mode="nearest")
    return ndimage.correlate1d(out, row_taps, axis=0, mode="nearest")


def blur_array(arr: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    return separable_correlate(np.asarray(arr, dtype=np.float64), k, k)


def gaussian_blur(frame: Frame, sigma: float) -> Frame:
    return Frame(np.clip(blur_array(frame.pixels, sigma), 0.0, 1.0), frame.index)


def resize_bilinear(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling with pixel-center alignment and clamped borders."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape
    nh, nw = shape
    if (nh, nw) == (h, w):
        return arr.copy()
    ys = (np.arange(nh) + 0.5) * (h / nh) - 0.5
    xs = (np.arange(nw) + 0.5) * (w / nw) - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bot = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def translate(arr: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Move image content by ``(dx, dy)`` pixels with bilinear sampling."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape
    rows, cols = np.indices((h, w), dtype=np.float64)
    return ndimage.map_coordinates(arr, [rows - dy, cols - dx], order=1, mode="nearest")


def scaled_dims(height: int, width: int, scale: float) -> tuple[int, int]:
    # the epsilon keeps e.g. 30 * 0.1 from rounding up to 4
    return (int(math.ceil(height * scale - 1e-9)), int(math.ceil(width * scale - 1e-9)))


def _check_scale(scale):
    if not (math.isfinite(scale) and 0.0 < scale < 1.0):
        raise InvalidParameterError(f"scale must lie in (0, 1), got {scale!r}")


def downsample_array(arr: np.ndarray, scale: float) -> np.ndarray:
    _check_scale(scale)
    nh, nw = scaled_dims(*arr.shape, scale)
    if nh < 1 or nw < 1:
        raise LevelTooSmallError(f"downsampling {arr.shape} by {scale} leaves an empty grid")
    smoothed = blur_array(arr, 0.5 * math.sqrt(1.0 / scale**2 - 1.0))
    return resize_bilinear(smoothed, (nh, nw))


def downsample(frame: Frame, scale: float) -> Frame:
    out = downsample_array(frame.pixels, scale)
    return Frame(np.clip(out, 0.0, 1.0), frame.index)


def build_pyramid(frame: Frame, levels: int, scale: float) -> Pyramid:
    """Gaussian pyramid, finest first; stops early below 16 px."""
    if levels < 1:
        raise InvalidParameterError(f"levels must be >= 1, got {levels}")
    _check_scale(scale)
    out = [frame]
    while len(out) < levels:
        nh, nw = scaled_dims(out[-1].height, out[-1].width, scale)
        if min(nh, nw) < MIN_PYRAMID_DIM:
            break
        out.append(downsample(out[-1], scale))
    return Pyramid(out, scale)


def iou_boxes(a, b) -> float:
    """Area IoU of two axis-aligned boxes exposing ``x, y, w, h``."""
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0:
        return 0.0
    return float(min(1.0, max(0.0, inter / union)))
