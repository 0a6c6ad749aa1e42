"""Dense two-frame optical flow by polynomial expansion (Farneback's method).

Each frame is locally approximated by a quadratic ``x^T A x + b^T x + c``;
a displacement ``d`` between two frames shows up as ``b2 = b1 - 2 A d``, which
is solved in a Gaussian-weighted neighbourhood, refined iteratively, and run
coarse-to-fine over an image pyramid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    FlowField,
    Frame,
    Heatmap,
    build_pyramid,
    gaussian_kernel,
    resize_bilinear,
    separable_correlate,
)
from .errors import InvalidInputError, InvalidParameterError

# |det G| below this fraction of trace(G)^2 counts as singular
SINGULAR_RTOL = 1e-9


@dataclass(frozen=True)
class FlowParams:
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    fps: float = 8.0

    def __post_init__(self):
        for name in ("window_size", "poly_n"):
            val = getattr(self, name)
            if int(val) != val or val < 3 or val % 2 == 0:
                raise InvalidParameterError(f"{name} must be an odd integer >= 3, got {val}")
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if self.pyramid_levels < 1:
            raise InvalidParameterError("pyramid_levels must be >= 1")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise InvalidParameterError("pyramid_scale must lie in (0, 1)")
        if not (math.isfinite(self.poly_sigma) and self.poly_sigma > 0):
            raise InvalidParameterError("poly_sigma must be positive")
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise InvalidParameterError("fps must be positive")


@dataclass(frozen=True, eq=False)
class PolyExpansion:
    """Per-pixel quadratic model coefficients; ``A = [[a11, a12], [a12, a22]]``."""

    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c: np.ndarray

    @property
    def shape(self):
        return self.c.shape

    @property
    def height(self):
        return self.c.shape[0]

    @property
    def width(self):
        return self.c.shape[1]


# basis order: 1, x, y, x^2, y^2, xy  (x = column offset, y = row offset)
_BASIS_POWERS = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1))


def _expansion_operators(poly_n, poly_sigma):
    half = poly_n // 2
    p = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-0.5 * (p / poly_sigma) ** 2)
    g /= g.sum()
    taps = [g * p**k for k in range(3)]

    xx, yy = np.meshgrid(p, p)
    applic = np.outer(g, g)
    basis = np.stack([xx**px * yy**py for px, py in _BASIS_POWERS])
    gram = np.einsum("ij,aij,bij->ab", applic, basis, basis)
    return taps, np.linalg.inv(gram)


def poly_expand_array(img: np.ndarray, poly_n: int, poly_sigma: float) -> PolyExpansion:
    img = np.asarray(img, dtype=np.float64)
    if poly_n < 3 or poly_n % 2 == 0:
        raise InvalidParameterError(f"poly_n must be odd and >= 3, got {poly_n}")
    if not poly_sigma > 0:
        raise InvalidParameterError(f"poly_sigma must be positive, got {poly_sigma}")
    if min(img.shape) < poly_n:
        raise InvalidInputError(f"frame {img.shape} smaller than the {poly_n}x{poly_n} neighbourhood")

    taps, gram_inv = _expansion_operators(poly_n, poly_sigma)
    # uniform certainty makes the normal matrix position-independent
    moments = np.stack([separable_correlate(img, taps[py], taps[px]) for px, py in _BASIS_POWERS])
    r = np.einsum("ab,bij->aij", gram_inv, moments)
    return PolyExpansion(
        a11=r[3], a12=0.5 * r[5], a22=r[4], b1=r[1], b2=r[2], c=r[0]
    )


def poly_expand(frame: Frame, poly_n: int, poly_sigma: float) -> PolyExpansion:
    """Fit the local quadratic signal model at every pixel of ``frame``."""
    return poly_expand_array(frame.pixels, poly_n, poly_sigma)


def _window_kernel(window_size):
    return gaussian_kernel(window_size / 5.0, radius=window_size // 2)


def _round_half_up(a):
    return np.floor(a + 0.5).astype(np.int64)


def displacement_arrays(e1, e2, prior_u, prior_v, window_size):
    if e1.shape != e2.shape or e1.shape != prior_u.shape:
        raise InvalidInputError(
            f"shape mismatch: {e1.shape}, {e2.shape}, prior {prior_u.shape}"
        )
    h, w = e1.shape
    du = _round_half_up(prior_u)
    dv = _round_half_up(prior_v)
    rows, cols = np.indices((h, w))
    tx = cols + du
    ty = rows + dv
    inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    tx = np.clip(tx, 0, w - 1)
    ty = np.clip(ty, 0, h - 1)

    a11 = 0.5 * (e1.a11 + e2.a11[ty, tx])
    a12 = 0.5 * (e1.a12 + e2.a12[ty, tx])
    a22 = 0.5 * (e1.a22 + e2.a22[ty, tx])
    db1 = -0.5 * (e2.b1[ty, tx] - e1.b1) + a11 * du + a12 * dv
    db2 = -0.5 * (e2.b2[ty, tx] - e1.b2) + a12 * du + a22 * dv

    terms = np.stack([
        a11 * a11 + a12 * a12,
        a11 * a12 + a12 * a22,
        a12 * a12 + a22 * a22,
        a11 * db1 + a12 * db2,
        a12 * db1 + a22 * db2,
    ])
    terms[:, ~inside] = 0.0
    k = _window_kernel(window_size)
    g11, g12, g22, h1, h2 = (separable_correlate(t, k, k) for t in terms)

    det = g11 * g22 - g12 * g12
    trace = g11 + g22
    ok = inside & (np.abs(det) >= SINGULAR_RTOL * (trace * trace + 1e-12))
    safe = np.where(ok, det, 1.0)
    u = np.where(ok, (g22 * h1 - g12 * h2) / safe, prior_u)
    v = np.where(ok, (g11 * h2 - g12 * h1) / safe, prior_v)
    return u, v


def displacement_step(e1: PolyExpansion, e2: PolyExpansion, prior: FlowField, window_size: int) -> FlowField:
    """One refinement of the displacement estimate given a prior field.

    Pixels whose rounded prior points outside the frame, and pixels whose
    aggregated system is near-singular, keep their prior value.
    """
    if window_size < 3 or window_size % 2 == 0:
        raise InvalidParameterError(f"window_size must be odd and >= 3, got {window_size}")
    if prior.shape != e1.shape:
        raise InvalidInputError(f"prior shape {prior.shape} != expansion shape {e1.shape}")
    u, v = displacement_arrays(e1, e2, prior.u, prior.v, window_size)
    return FlowField(u, v)


def farneback_levels(prev: Frame, next: Frame, params: FlowParams = FlowParams()) -> list[FlowField]:
    """Coarse-to-fine flow; returns the estimate at every pyramid level, finest first."""
    if prev.shape != next.shape:
        raise InvalidInputError(f"frame shapes differ: {prev.shape} vs {next.shape}")
    pyr1 = build_pyramid(prev, params.pyramid_levels, params.pyramid_scale)
    pyr2 = build_pyramid(next, params.pyramid_levels, params.pyramid_scale)

    results = []
    u = v = None
    for level in range(len(pyr1) - 1, -1, -1):
        f1, f2 = pyr1[level], pyr2[level]
        if u is None:
            u = np.zeros(f1.shape)
            v = np.zeros(f1.shape)
        else:
            u = resize_bilinear(u, f1.shape) / params.pyramid_scale
            v = resize_bilinear(v, f1.shape) / params.pyramid_scale
        e1 = poly_expand(f1, params.poly_n, params.poly_sigma)
        e2 = poly_expand(f2, params.poly_n, params.poly_sigma)
        for _ in range(params.iterations):
            u, v = displacement_arrays(e1, e2, u, v, params.window_size)
        results.append(FlowField(u, v))
    return results[::-1]


def farneback_flow(prev: Frame, next: Frame, params: FlowParams = FlowParams()) -> FlowField:
    """Dense flow from ``prev`` to ``next`` in pixels per frame."""
    return farneback_levels(prev, next, params)[0]


def flow_magnitude(flow: FlowField) -> Heatmap:
    return Heatmap(np.hypot(flow.u, flow.v))


_MODES = {"mean": "mean", "mean-magnitude": "mean", "max": "max", "max-magnitude": "max"}


def aggregate_flow(flows, mode: str = "mean-magnitude") -> Heatmap:
    """Per-pixel mean or max of flow magnitudes over a temporal window."""
    flows = list(flows)
    if not flows:
        raise InvalidInputError("cannot aggregate an empty list of flow fields")
    if mode not in _MODES:
        raise InvalidParameterError(f"unknown aggregation mode {mode!r}")
    shape = flows[0].shape
    for f in flows:
        if f.shape != shape:
            raise InvalidInputError(f"flow shapes differ: {shape} vs {f.shape}")
    mags = np.stack([np.hypot(f.u, f.v) for f in flows])
    out = mags.mean(axis=0) if _MODES[mode] == "mean" else mags.max(axis=0)
    return Heatmap(out)
