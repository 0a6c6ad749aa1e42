import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from flowloc.boxes import BBox, BoxSet, boxes_to_mask, mask_to_heatmap
from flowloc.core import Heatmap, Mask
from flowloc.errors import InvalidInputError, InvalidParameterError
from flowloc.metrics import EvalConfig, default_auc_taus, evaluate, frame_iou, trapezoid_auc


def box(x, y, w, h, i=0, sounding=True):
    return BBox(x, y, w, h, "car", i, sounding)


class TestFrameIoU:
    def test_perfect(self):
        gt = boxes_to_mask([box(4, 4, 10, 8)], 32, 24)
        assert frame_iou(mask_to_heatmap(gt), gt, 0.5) == 1.0

    def test_offset_third(self):
        pred = mask_to_heatmap(boxes_to_mask([box(0, 0, 10, 10)], 32, 32))
        gt = boxes_to_mask([box(5, 0, 10, 10)], 32, 32)
        assert frame_iou(pred, gt, 0.5) == pytest.approx(50 / 150, abs=1e-15)

    def test_empty_prediction(self):
        gt = boxes_to_mask([box(0, 0, 4, 4)], 8, 8)
        assert frame_iou(Heatmap(np.zeros((8, 8))), gt, 0.5) == 0.0

    def test_both_empty(self):
        assert frame_iou(Heatmap(np.zeros((8, 8))), Mask(np.zeros((8, 8))), 0.5) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            frame_iou(Heatmap(np.zeros((8, 8))), Mask(np.zeros((8, 9))), 0.5)

    def test_resolution_doubling(self, rng):
        v = rng.random((16, 16))
        g = rng.random((16, 16)) > 0.6
        up = lambda a: np.repeat(np.repeat(a, 2, axis=0), 2, axis=1)  # noqa: E731
        assert frame_iou(Heatmap(v), Mask(g), 0.5) == frame_iou(Heatmap(up(v)), Mask(up(g)), 0.5)


class TestConfig:
    def test_defaults(self):
        c = EvalConfig()
        assert c.tau == 0.5 and c.aggregate == "mean-iou"
        assert c.auc_taus[0] == 0.05 and c.auc_taus[-1] == 0.95 and len(c.auc_taus) == 19

    @pytest.mark.parametrize("kw", [{"auc_taus": (0.5, 0.4)}, {"auc_taus": ()}, {"tau": 1.5}, {"aggregate": "median"}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            EvalConfig(**kw)

    def test_step(self):
        assert default_auc_taus(0.1) == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


class TestEvaluate:
    def test_all_perfect(self):
        gts = [BoxSet(i, (box(2 + i, 3, 6, 5, i),)) for i in range(3)]
        preds = [mask_to_heatmap(boxes_to_mask(g, 16, 12)) for g in gts]
        r = evaluate(preds, gts)
        assert r.ciou == 1.0 and r.auc == pytest.approx(1.0, abs=1e-12) and r.n_frames == 3

    def test_half_and_half(self):
        gts = [BoxSet(0, (box(0, 0, 4, 4, 0),)), BoxSet(1, (box(0, 0, 4, 4, 1),))]
        preds = [mask_to_heatmap(boxes_to_mask(gts[0], 8, 8)), Heatmap(np.zeros((8, 8)))]
        r = evaluate(preds, gts)
        assert r.ciou == 0.5 and r.auc == pytest.approx(0.5, abs=1e-12)
        assert r.per_frame == [(0, 1.0), (1, 0.0)]

    def test_success_ratio(self):
        gts = [BoxSet(i, (box(0, 0, 4, 4, i),)) for i in range(4)]
        full = mask_to_heatmap(boxes_to_mask(gts[0], 8, 8))
        preds = [full, full, full, Heatmap(np.zeros((8, 8)))]
        r = evaluate(preds, gts, EvalConfig(aggregate="success-ratio"))
        assert r.ciou == 0.75

    def test_silent_boxes_ignored(self):
        gts = [BoxSet(0, (box(0, 0, 4, 4), box(4, 4, 4, 4, sounding=False)))]
        pred = mask_to_heatmap(boxes_to_mask([box(0, 0, 4, 4)], 8, 8))
        assert evaluate([pred], gts).ciou == 1.0

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            evaluate([], [])
        with pytest.raises(InvalidInputError):
            evaluate([Heatmap(np.zeros((2, 2)))], [])
        with pytest.raises(InvalidInputError):
            evaluate([Heatmap(np.full((2, 2), 2.0))], [BoxSet(0)])

    def test_permutation_invariant(self, rng):
        gts = [BoxSet(i, (box(*rng.integers(0, 10, 2), 6, 6, i),)) for i in range(6)]
        preds = [Heatmap(rng.random((16, 16))) for _ in gts]
        r1 = evaluate(preds, gts)
        order = rng.permutation(6)
        r2 = evaluate([preds[k] for k in order], [gts[k] for k in order])
        assert r1.ciou == r2.ciou and r1.auc == r2.auc

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=19))
    @settings(max_examples=200, deadline=None)
    def test_auc_bounds(self, curve):
        taus = default_auc_taus()[: len(curve)]
        a = trapezoid_auc(taus, curve)
        assert min(curve) - 1e-12 <= a <= max(curve) + 1e-12

    @pytest.mark.parametrize("c", [0.0, 0.13, 0.5, 1.0])
    def test_auc_constant(self, c):
        assert abs(trapezoid_auc(default_auc_taus(), [c] * 19) - c) < 1e-12

    def test_matches_oracle(self, rng):
        for _ in range(20):
            gts = [BoxSet(i, (box(*rng.integers(0, 24, 2), *rng.integers(1, 12, 2), i),)) for i in range(2)]
            preds = [Heatmap(np.round(rng.random((32, 32)), 2)) for _ in gts]
            cfg = EvalConfig()
            r = evaluate(preds, gts, cfg)
            masks = [oracles.rasterize(g.boxes, 32, 32) for g in gts]
            per, ciou, auc = oracles.evaluate([p.values.tolist() for p in preds], masks, 0.5, cfg.auc_taus, "mean-iou")
            assert [v for _, v in r.per_frame] == per
            assert abs(r.ciou - ciou) < 1e-12 and abs(r.auc - auc) < 1e-12
