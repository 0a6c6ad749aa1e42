"""Regenerate the OpenCV reference flow fixtures under tests/data/opencv_ref.

Needs opencv-python; the test suite only reads the committed outputs.
Each case directory holds prev.pgm, next.pgm and opencv.flo.

OpenCV counts pyramid levels beyond the original image, so levels=2 there
matches our default of 3 levels. The Gaussian window flag is set because
our neighbourhood aggregation is Gaussian-weighted.
"""
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "opencv_ref"
H, W = 80, 96


def texture(rng, shape, sigma=2.0):
    n = ndimage.gaussian_filter(rng.random(shape), sigma)
    return (n - n.min()) / (n.max() - n.min())


def shifted(img, dx, dy):
    # content moves by (+dx, +dy)
    return ndimage.shift(img, (dy, dx), order=3, mode="nearest")


def crop(img, pad):
    return img[pad:-pad, pad:-pad]


def zoomed(img, factor):
    h, w = img.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    matrix = np.eye(2) / factor
    offset = np.array([cy, cx]) - matrix @ np.array([cy, cx])
    return ndimage.affine_transform(img, matrix, offset, order=3, mode="nearest")


def cases():
    rng = np.random.default_rng(2024)
    pad = 8
    big = texture(rng, (H + 2 * pad, W + 2 * pad))
    yield "shift_2_1", crop(big, pad), crop(shifted(big, 2, 1), pad)
    big = texture(rng, (H + 2 * pad, W + 2 * pad))
    yield "shift_m3_2", crop(big, pad), crop(shifted(big, -3, 2), pad)
    big = texture(rng, (H + 2 * pad, W + 2 * pad), 2.5)
    yield "subpixel_1.5_m0.5", crop(big, pad), crop(shifted(big, 1.5, -0.5), pad)

    bg = 0.2 + 0.6 * texture(rng, (H, W))
    blk = texture(rng, (28, 28), 1.5)
    a, b = bg.copy(), bg.copy()
    a[26:54, 20:48] = blk
    b[26:54, 23:51] = blk
    yield "block_3_0", a, b

    img = texture(rng, (H, W), 2.5)
    yield "zoom_1.04", img, zoomed(img, 1.04)


def write_pgm(arr, path):
    img = np.clip(np.round(arr * 255), 0, 255).astype(np.uint8)
    path.write_bytes(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode() + img.tobytes())
    return img


def write_flo(flow, path):
    h, w = flow.shape[:2]
    path.write_bytes(b"PIEH" + np.array([w, h], "<i4").tobytes() + flow.astype("<f4").tobytes())


def main():
    for name, a, b in cases():
        d = OUT / name
        d.mkdir(parents=True, exist_ok=True)
        a8 = write_pgm(a, d / "prev.pgm")
        b8 = write_pgm(b, d / "next.pgm")
        flow = cv2.calcOpticalFlowFarneback(
            a8, b8, None, pyr_scale=0.5, levels=2, winsize=15, iterations=3,
            poly_n=5, poly_sigma=1.1, flags=cv2.OPTFLOW_FARNEBACK_GAUSSIAN,
        )
        write_flo(flow, d / "opencv.flo")
        print(name, "median |flow|", float(np.median(np.hypot(flow[..., 0], flow[..., 1]))))


if __name__ == "__main__":
    main()
