"""Reading and writing frames, flow fields, heatmaps, annotations and reports.

Binary formats are stored in float32, so round-trips are bit-exact for any
value representable in single precision.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .boxes import BBox, BoxSet
from .core import FlowField, Frame, Heatmap, resize_bilinear, to_grayscale
from .errors import FormatError, InvalidInputError, InvalidParameterError, ParseError
from .metrics import EvalConfig, EvalReport

log = logging.getLogger(__name__)

FLO_MAGIC = b"PIEH"
FRAME_SUFFIXES = (".pgm", ".png")
ANNOTATION_FIELDS = ["frame_index", "class", "x", "y", "w", "h", "sounding", "confidence"]


def indexed_name(index: int, suffix: str) -> str:
    return f"{index:06d}{suffix}"


def indexed_files(directory, suffix: str) -> dict[int, Path]:
    """Map the trailing integer of each file stem to its path."""
    out = {}
    for p in sorted(Path(directory).iterdir()):
        if p.suffix.lower() != suffix:
            continue
        m = re.search(r"(\d+)$", p.stem)
        if m:
            out[int(m.group(1))] = p
    return out


# ---------------------------------------------------------------- frames

def _read_token(fh):
    token = b""
    while True:
        ch = fh.read(1)
        if not ch:
            break
        if ch == b"#" and not token:
            fh.readline()
            continue
        if ch.isspace():
            if token:
                break
            continue
        token += ch
    return token


def read_pgm(path) -> np.ndarray:
    """Binary (P5) PGM as floats in [0, 1]."""
    with open(path, "rb") as fh:
        if fh.read(2) != b"P5":
            raise FormatError(f"{path}: not a binary PGM (P5) file")
        try:
            width, height, maxval = (int(_read_token(fh)) for _ in range(3))
        except ValueError as exc:
            raise FormatError(f"{path}: malformed PGM header") from exc
        if not 0 < maxval < 65536:
            raise FormatError(f"{path}: invalid PGM maxval {maxval}")
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        data = np.frombuffer(fh.read(width * height * dtype.itemsize), dtype=dtype)
    if data.size != width * height:
        raise FormatError(f"{path}: truncated PGM payload")
    return data.reshape(height, width).astype(np.float64) / maxval


def write_pgm(pixels: np.ndarray, path):
    img = np.clip(np.round(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_image(path) -> np.ndarray:
    """Grayscale image in [0, 1] from a PGM or PNG file."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".pgm":
            return read_pgm(path)
        with Image.open(path) as im:
            if im.mode == "P":
                im = im.convert("RGBA")
            arr = np.asarray(im)
            mode = im.mode
    except FormatError:
        raise
    except OSError as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    if mode in ("I;16", "I;16B", "I"):
        return arr.astype(np.float64) / 65535.0
    arr = arr.astype(np.float64) / 255.0
    if arr.ndim == 3:
        if arr.shape[2] == 2:  # LA
            arr = arr[..., 0]
        else:
            arr = to_grayscale(arr)
    return arr


def write_frame(frame: Frame, path):
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        write_pgm(frame.pixels, path)
    else:
        img = np.clip(np.round(frame.pixels * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(img, mode="L").save(path, optimize=False)


def load_frames(path, fps_target: float = 8.0, fps_source: float | None = None) -> list[Frame]:
    """Load an image sequence, keeping every ``round(fps_source / fps_target)``-th file.

    Frame indices are ordinals within the kept sequence.
    """
    if fps_source is None:
        fps_source = fps_target
    if not (fps_target > 0 and fps_source > 0):
        raise InvalidParameterError("frame rates must be positive")
    step = int(round(fps_source / fps_target))
    if step < 1:
        raise InvalidParameterError(
            f"target rate {fps_target} exceeds source rate {fps_source}; cannot upsample"
        )
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    frames = []
    for k, p in enumerate(files[::step]):
        pixels = read_image(p)
        if frames and pixels.shape != frames[0].shape:
            raise InvalidInputError(
                f"{p.name} is {pixels.shape[1]}x{pixels.shape[0]}, expected "
                f"{frames[0].width}x{frames[0].height}"
            )
        frames.append(Frame(np.clip(pixels, 0.0, 1.0), k))
    log.debug("loaded %d of %d frames from %s (step %d)", len(frames), len(files), path, step)
    return frames


# ---------------------------------------------------------------- flow

def write_flo(flow: FlowField, path):
    h, w = flow.shape
    data = np.empty((h, w, 2), dtype="<f4")
    data[..., 0] = flow.u
    data[..., 1] = flow.v
    with open(path, "wb") as fh:
        fh.write(FLO_MAGIC)
        fh.write(np.array([w, h], dtype="<i4").tobytes())
        fh.write(data.tobytes())


def read_flo(path) -> FlowField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != FLO_MAGIC:
        raise FormatError(f"{path}: bad .flo magic {raw[:4]!r}")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated .flo header")
    w, h = np.frombuffer(raw[4:12], dtype="<i4")
    if w < 1 or h < 1:
        raise FormatError(f"{path}: invalid .flo dimensions {w}x{h}")
    expected = 12 + 8 * int(w) * int(h)
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw[12:], dtype="<f4").reshape(h, w, 2).astype(np.float64)
    return FlowField(data[..., 0], data[..., 1])


# ---------------------------------------------------------------- heatmaps

def write_heatmap(heatmap: Heatmap, path):
    """Grayscale little-endian PFM; rows are stored bottom-to-top."""
    h, w = heatmap.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.flipud(heatmap.values).astype("<f4").tobytes())


def read_heatmap(path, shape: tuple[int, int] | None = None) -> Heatmap:
    """Read a grayscale PFM; with ``shape=(height, width)`` rescale bilinearly to it."""
    with open(path, "rb") as fh:
        kind = fh.readline().rstrip()
        if kind == b"PF":
            raise FormatError(f"{path}: color PFM is not supported")
        if kind != b"Pf":
            raise FormatError(f"{path}: not a PFM file")
        dims = re.match(rb"^\s*(\d+)\s+(\d+)\s*$", fh.readline())
        if not dims:
            raise FormatError(f"{path}: malformed PFM dimensions")
        w, h = int(dims.group(1)), int(dims.group(2))
        try:
            scale = float(fh.readline())
        except ValueError as exc:
            raise FormatError(f"{path}: malformed PFM scale") from exc
        if scale == 0 or not math.isfinite(scale):
            raise FormatError(f"{path}: invalid PFM scale {scale}")
        dtype = "<f4" if scale < 0 else ">f4"
        payload = fh.read()
    if len(payload) != 4 * w * h:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {4 * w * h}")
    values = np.flipud(np.frombuffer(payload, dtype=dtype).reshape(h, w)).astype(np.float64)
    if shape is not None and tuple(shape) != values.shape:
        values = resize_bilinear(values, tuple(shape))
    return Heatmap(values)


# ---------------------------------------------------------------- annotations

def _fmt_num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def _parse_bool(text, line):
    t = text.strip().lower()
    if t == "":
        return None
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ParseError(f"cannot parse sounding flag {text!r}", line)


def read_annotations(path, frame_range: range | None = None) -> list[BoxSet]:
    """Per-frame box sets from the annotation CSV, ordered by frame index.

    With ``frame_range``, frames without rows yield empty sets and rows
    outside the range are dropped.
    """
    grouped: dict[int, list[BBox]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return [BoxSet(i) for i in frame_range] if frame_range is not None else []
        header = [h.strip() for h in header]
        if header[:6] != ANNOTATION_FIELDS[:6]:
            raise ParseError(f"unexpected header {header}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if not 6 <= len(row) <= 8:
                raise ParseError(f"expected 6 to 8 fields, got {len(row)}", lineno)
            row = row + [""] * (8 - len(row))
            try:
                idx = int(row[0])
                x, y, w, h = (float(v) for v in row[2:6])
                conf = float(row[7]) if row[7].strip() else None
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
            if w < 0 or h < 0:
                raise InvalidInputError(f"line {lineno}: negative box extent ({w}, {h})")
            box = BBox(x, y, w, h, row[1].strip(), idx, _parse_bool(row[6], lineno), conf)
            grouped.setdefault(idx, []).append(box)
    if frame_range is not None:
        return [BoxSet(i, tuple(grouped.get(i, ()))) for i in frame_range]
    return [BoxSet(i, tuple(grouped[i])) for i in sorted(grouped)]


def write_annotations(boxsets, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ANNOTATION_FIELDS)
        for bs in sorted(boxsets, key=lambda s: s.frame_index):
            for b in bs.boxes:
                writer.writerow([
                    b.frame_index,
                    b.class_label,
                    _fmt_num(b.x),
                    _fmt_num(b.y),
                    _fmt_num(b.w),
                    _fmt_num(b.h),
                    "" if b.sounding is None else int(b.sounding),
                    "" if b.confidence is None else repr(float(b.confidence)),
                ])


# ---------------------------------------------------------------- reports

def report_to_dict(report: EvalReport) -> dict:
    return {
        "ciou": report.ciou,
        "auc": report.auc,
        "n_frames": report.n_frames,
        "config": report.config.to_dict(),
        "curve": [{"tau": t, "value": v} for t, v in report.curve],
        "per_frame": [{"frame_index": i, "iou": v} for i, v in report.per_frame],
    }


def write_report(report: EvalReport, path, format: str | None = None):
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "json")
    if fmt == "json":
        path.write_text(json.dumps(report_to_dict(report), indent=2) + "\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["frame_index", "iou"])
            for i, v in report.per_frame:
                writer.writerow([i, repr(v)])
    else:
        raise InvalidParameterError(f"unknown report format {fmt!r}")


def read_report(path) -> EvalReport:
    d = json.loads(Path(path).read_text())
    return EvalReport(
        per_frame=[(r["frame_index"], r["iou"]) for r in d["per_frame"]],
        ciou=d["ciou"],
        auc=d["auc"],
        n_frames=d["n_frames"],
        config=EvalConfig.from_dict(d["config"]),
        curve=[(r["tau"], r["value"]) for r in d.get("curve", [])],
    )
