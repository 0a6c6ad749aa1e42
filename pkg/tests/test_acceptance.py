"""Exit criteria. Each test carries an ``acceptance`` marker; the terminal
summary prints one PASS/FAIL line per criterion."""
import json
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import DATA, band_limited, shifted_pair
from flowloc import io as fio
from flowloc.boxes import BBox, BoxSet, boxes_to_mask, sounding_only, stationarity_filter
from flowloc.cli import main
from flowloc.core import FlowField, Frame, Heatmap
from flowloc.flow import farneback_flow, flow_magnitude
from flowloc.fusion import flowgrad_h, fuse_multiply, minmax_normalize
from flowloc.metrics import EvalConfig, evaluate, frame_iou, trapezoid_auc
from flowloc.synth import Actor, Scenario, canonical_scenario, render, semantic_oracle, simulated_detections

DEMOS = Path(__file__).resolve().parents[1] / "demos"
N_PROPERTY = 1000

# frozen from the brute-force pixel counter in tests/oracles.py on the in-memory pipeline
CANONICAL_GOLDEN = {
    "flowgrad-h": (0.9689393939393939, 0.779805061268294),
    "flow-only": (0.504869305355575, 0.5176183738487448),
    "semantic-only": (0.30933333333333335, 0.2665075715116038),
}
SHAKY_GOLDEN = {
    "flowgrad-h": (0.5279014332145248, 0.38569851670869315),
    "flow-only": (0.25588388886034924, 0.17897289620010157),
    "semantic-only": (0.30933333333333335, 0.2665075715116038),
}
GOLDEN_TOL = 1e-9


def scene_maps(scenario):
    frames, gt = render(scenario)
    sem = semantic_oracle(scenario, "all-vehicles")
    flows = [farneback_flow(a, b) for a, b in zip(frames, frames[1:])]
    n = len(flows)
    maps = {
        "flowgrad-h": [flowgrad_h(s, f) for s, f in zip(sem, flows)],
        "flow-only": [minmax_normalize(flow_magnitude(f)) for f in flows],
        "semantic-only": sem[:n],
    }
    return maps, gt[:n]


def oracle_scores(maps, gts, width, height):
    masks = [oracles.rasterize(list(sounding_only(g)), width, height) for g in gts]
    cfg = EvalConfig()
    _, ciou, auc = oracles.evaluate([m.values.tolist() for m in maps], masks, cfg.tau, cfg.auc_taus, "mean-iou")
    return ciou, auc


@pytest.mark.acceptance(1, "zero-motion soundness (< 1e-3 px, 320x240 under 2 s)")
def test_zero_motion():
    rng = np.random.default_rng(1)
    frames = [band_limited(s, (240, 320)) for s in range(3)] + [rng.random((240, 320)), np.zeros((240, 320))]
    for img in frames:
        f = Frame(img)
        t0 = time.perf_counter()
        flow = farneback_flow(f, f)
        elapsed = time.perf_counter() - t0
        assert np.max(np.hypot(flow.u, flow.v)) < 1e-3
        assert elapsed < 2.0


@pytest.mark.acceptance(2, "translation recovery: median EPE < 0.5 px in >= 18/20 cases")
def test_translation_recovery():
    rng = np.random.default_rng(2024)
    good = 0
    for seed in range(20):
        while True:
            dx, dy = (int(v) for v in rng.integers(-4, 5, size=2))
            if dx * dx + dy * dy <= 16:
                break
        a, b = shifted_pair(1000 + seed, (256, 256), dx, dy)
        flow = farneback_flow(Frame(a), Frame(b))
        epe = np.hypot(flow.u - dx, flow.v - dy)[16:-16, 16:-16]
        good += np.median(epe) < 0.5
    assert good >= 18


@pytest.mark.acceptance(3, "OpenCV cross-check: median endpoint difference < 1.0 px on 5 fixtures")
def test_reference_cross_check():
    cases = sorted(p for p in (DATA / "opencv_ref").iterdir() if p.is_dir())
    assert len(cases) == 5
    for case in cases:
        prev = Frame(fio.read_image(case / "prev.pgm"))
        nxt = Frame(fio.read_image(case / "next.pgm"))
        ref = fio.read_flo(case / "opencv.flo")
        ours = farneback_flow(prev, nxt)
        diff = np.median(np.hypot(ours.u - ref.u, ours.v - ref.v))
        assert diff < 1.0, f"{case.name}: {diff}"


@pytest.mark.acceptance(4, "fusion algebra properties (1000 cases each)")
def test_fusion_algebra():
    rng = np.random.default_rng(4)
    for _ in range(N_PROPERTY):
        shape = tuple(rng.integers(2, 12, size=2))
        v = rng.normal(size=shape) * rng.uniform(0.01, 100)
        m = Heatmap(v)
        once = minmax_normalize(m).values
        assert np.max(np.abs(minmax_normalize(Heatmap(once)).values - once)) <= 1e-12
        a, b = rng.uniform(0.1, 10), rng.uniform(-10, 10)
        assert np.max(np.abs(minmax_normalize(Heatmap(a * v + b)).values - once)) <= 1e-12

        assert np.max(np.abs(fuse_multiply([m, Heatmap(np.ones(shape))]).values - once)) <= 1e-12
        assert np.all(fuse_multiply([m, Heatmap(np.zeros(shape))]).values == 0)
        others = [Heatmap(rng.random(shape)) for _ in range(rng.integers(1, 4))]
        base = fuse_multiply([m, *others]).values
        perm = [[m, *others][k] for k in rng.permutation(len(others) + 1)]
        assert np.max(np.abs(fuse_multiply(perm).values - base)) <= 1e-12

        u = rng.normal(size=shape) * (rng.random(shape) > 0.4)
        flow = FlowField(u, rng.normal(size=shape) * (u != 0))
        out = flowgrad_h(Heatmap(rng.random(shape)), flow).values
        assert np.all(out[(flow.u == 0) & (flow.v == 0)] == 0)


@pytest.mark.acceptance(5, "metrics equal brute-force pixel counting (500 instances, 1e-12)")
def test_metric_oracle():
    rng = np.random.default_rng(5)
    taus = EvalConfig().auc_taus
    for _ in range(500):
        n = int(rng.integers(1, 4))
        gts, preds = [], []
        for i in range(n):
            boxes = tuple(
                BBox(*(int(v) for v in rng.integers(-4, 30, 2)), *(int(v) for v in rng.integers(0, 16, 2)), "car", i, bool(rng.random() < 0.8))
                for _ in range(rng.integers(0, 4))
            )
            gts.append(BoxSet(i, boxes))
            vals = rng.random((32, 32))
            if rng.random() < 0.5:
                vals = np.round(vals * 20) / 20  # land exactly on grid thresholds
            preds.append(Heatmap(vals))
        masks = [oracles.rasterize(list(sounding_only(g)), 32, 32) for g in gts]
        plain = [p.values.tolist() for p in preds]

        for p, g, mk in zip(preds, gts, masks):
            got = frame_iou(p, boxes_to_mask(sounding_only(g), 32, 32), 0.5)
            assert abs(got - oracles.iou_count(p.values.tolist(), mk, 0.5)) <= 1e-12

        for mode in ("mean-iou", "success-ratio"):
            cfg = EvalConfig(aggregate=mode)
            r = evaluate(preds, gts, cfg)
            per, ciou, auc = oracles.evaluate(plain, masks, 0.5, taus, mode)
            assert all(abs(a - b) <= 1e-12 for (_, a), b in zip(r.per_frame, per))
            assert abs(r.ciou - ciou) <= 1e-12
            assert abs(r.auc - auc) <= 1e-12

    for c in rng.random(50):
        assert abs(trapezoid_auc(taus, [c] * len(taus)) - c) <= 1e-12


@pytest.mark.acceptance(6, "stationarity filter: static scene -> 0 boxes, moving scene -> all kept")
def test_stationarity_filter():
    static = Scenario(160, 120, 8, actors=(
        Actor.linear((30, 20), (10, 10), (0, 0), 8),
        Actor.linear((40, 24), (80, 60), (0, 0), 8, class_label="truck"),
    ))
    out = stationarity_filter(simulated_detections(static), 0.95)
    assert sum(len(s) for s in out) == 0

    moving = Scenario(200, 120, 8, actors=(
        Actor.linear((20, 20), (4, 10), (10, 0), 8),
        Actor.linear((30, 20), (150, 80), (-3, -2), 8, class_label="bus"),
    ))
    dets = simulated_detections(moving)
    out = stationarity_filter(dets, 0.95)
    assert out == dets


@pytest.mark.acceptance(7, "synthetic ranking flowgrad-h > flow-only > semantic-only, ratio >= 1.5, goldens")
def test_directional_ranking():
    sc = canonical_scenario()
    maps, gt = scene_maps(sc)
    scores = {}
    for name, m in maps.items():
        r = evaluate(m, gt)
        ciou, auc = oracle_scores(m, gt, sc.width, sc.height)
        assert abs(r.ciou - ciou) <= 1e-12 and abs(r.auc - auc) <= 1e-12
        gold_c, gold_a = CANONICAL_GOLDEN[name]
        assert abs(ciou - gold_c) <= GOLDEN_TOL and abs(auc - gold_a) <= GOLDEN_TOL
        scores[name] = r.ciou
    assert scores["flowgrad-h"] > scores["flow-only"] > scores["semantic-only"]
    assert scores["flowgrad-h"] >= 1.5 * scores["semantic-only"]


@pytest.mark.acceptance(8, "camera shake (3 px) lowers flowgrad-h cIoU")
def test_shake_degradation():
    calm_maps, calm_gt = scene_maps(canonical_scenario())
    shaky = canonical_scenario(camera_shake=3)
    shaky_maps, shaky_gt = scene_maps(shaky)
    calm = evaluate(calm_maps["flowgrad-h"], calm_gt).ciou
    shook = evaluate(shaky_maps["flowgrad-h"], shaky_gt).ciou
    for name, (gold_c, gold_a) in SHAKY_GOLDEN.items():
        ciou, auc = oracle_scores(shaky_maps[name], shaky_gt, shaky.width, shaky.height)
        assert abs(ciou - gold_c) <= GOLDEN_TOL and abs(auc - gold_a) <= GOLDEN_TOL
    assert shook < calm


@pytest.mark.acceptance(9, "format round-trips (100 each) and 28-byte .flo golden")
def test_format_round_trips(tmp_path):
    from test_io import GOLDEN_2X1_HEX

    rng = np.random.default_rng(9)
    for k in range(100):
        shape = tuple(int(v) for v in rng.integers(1, 20, size=2))
        f32 = lambda: (rng.normal(size=shape) * 50).astype(np.float32).astype(np.float64)  # noqa: E731

        flow = FlowField(f32(), f32())
        fio.write_flo(flow, tmp_path / "a.flo")
        back = fio.read_flo(tmp_path / "a.flo")
        assert back.u.tobytes() == flow.u.tobytes() and back.v.tobytes() == flow.v.tobytes()

        hm = Heatmap(f32())
        fio.write_heatmap(hm, tmp_path / "a.pfm")
        assert fio.read_heatmap(tmp_path / "a.pfm").values.tobytes() == hm.values.tobytes()

        sets = []
        for i in sorted(set(int(v) for v in rng.integers(0, 50, size=rng.integers(1, 5)))):
            sets.append(BoxSet(i, tuple(
                BBox(
                    float(rng.choice([rng.integers(-10, 300), rng.normal() * 100])),
                    float(rng.integers(0, 300)),
                    float(rng.choice([rng.integers(0, 80), abs(rng.normal()) * 40])),
                    float(rng.integers(0, 80)),
                    str(rng.choice(["car", "bus", "truck", "motorcycle", "person"])),
                    i,
                    [None, True, False][int(rng.integers(0, 3))],
                    None if rng.random() < 0.3 else float(rng.random()),
                )
                for _ in range(rng.integers(1, 4))
            )))
        fio.write_annotations(sets, tmp_path / "a.csv")
        assert fio.read_annotations(tmp_path / "a.csv") == sets

        per = [(int(i), float(rng.random())) for i in range(rng.integers(1, 6))]
        from flowloc.metrics import EvalReport

        rep = EvalReport(per, float(rng.random()), float(rng.random()), len(per), EvalConfig(), [(0.5, float(rng.random()))])
        fio.write_report(rep, tmp_path / "r.json")
        assert fio.read_report(tmp_path / "r.json") == rep

    fio.write_flo(FlowField(np.array([[1.0, 2.0]]), np.array([[0.0, -1.0]])), tmp_path / "g.flo")
    raw = (tmp_path / "g.flo").read_bytes()
    assert len(raw) == 28 and raw.hex() == GOLDEN_2X1_HEX


@pytest.mark.acceptance(10, "pipeline determinism: byte-identical reports across runs")
def test_pipeline_determinism(tmp_path):
    for run in ("a", "b"):
        assert main(["pipeline", "--scenario", str(DEMOS / "canonical.scenario"), "--out", str(tmp_path / run)]) == 0
    reports = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("report.json"))
    assert len(reports) == 4
    for rel in reports:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["flowgrad-h"]["ciou"] > summary["flow-only"]["ciou"] > summary["semantic-only"]["ciou"]
