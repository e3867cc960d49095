import math

import numpy as np
import pytest

from dualseg.datamodel import LabelMap
from dualseg.errors import ValidationError
from dualseg.metrics import dice_jaccard, evaluate_case, surface_distances, write_report
from oracles import dice_jaccard_sets, surface_distances_loop


def _lm(arr, num_classes=2):
    return LabelMap(np.asarray(arr, dtype=np.int32), num_classes)


def _random_mask_pair(rng, size, p=0.3):
    pred = (rng.random((size, size)) < p).astype(np.int32)
    gt = (rng.random((size, size)) < p).astype(np.int32)
    return _lm(pred), _lm(gt)


class TestDiceJaccard:
    def test_perfect(self):
        m = _lm([[0, 1], [1, 0]])
        assert dice_jaccard(m, m, 1) == (1.0, 1.0)

    def test_disjoint(self):
        a = _lm([[1, 0], [0, 0]])
        b = _lm([[0, 0], [0, 1]])
        assert dice_jaccard(a, b, 1) == (0.0, 0.0)

    def test_half_overlap(self):
        # |A| = |B| = 4, |A n B| = 2 -> dice 0.5, jaccard 1/3
        a = np.zeros((4, 4), dtype=np.int32)
        b = np.zeros((4, 4), dtype=np.int32)
        a[0, 0:4] = 1
        b[0, 2:4] = 1
        b[1, 0:2] = 1
        d, j = dice_jaccard(_lm(a), _lm(b), 1)
        assert d == pytest.approx(0.5)
        assert j == pytest.approx(1.0 / 3.0)

    def test_both_empty_is_one(self):
        a = _lm(np.zeros((3, 3), dtype=np.int32))
        assert dice_jaccard(a, a, 1) == (1.0, 1.0)

    def test_symmetry_and_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            pred, gt = _random_mask_pair(rng, 8)
            d1, j1 = dice_jaccard(pred, gt, 1)
            d2, j2 = dice_jaccard(gt, pred, 1)
            assert (d1, j1) == (d2, j2)
            assert d1 >= j1
            assert d1 == pytest.approx(2 * j1 / (1 + j1))

    def test_matches_set_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            pred, gt = _random_mask_pair(rng, 10)
            assert dice_jaccard(pred, gt, 1) == pytest.approx(dice_jaccard_sets(pred.data, gt.data, 1))


class TestSurfaceDistances:
    def test_identical_masks_zero(self):
        data = np.zeros((8, 8), dtype=np.int32)
        data[2:6, 3:7] = 1
        m = _lm(data)
        assert surface_distances(m, m, 1, (1.0, 1.0)) == (0.0, 0.0)

    def test_single_voxels_three_apart(self):
        a = np.zeros((8, 8), dtype=np.int32)
        b = np.zeros((8, 8), dtype=np.int32)
        a[4, 2] = 1
        b[4, 5] = 1
        hd, asd = surface_distances(_lm(a), _lm(b), 1, (1.0, 1.0))
        assert hd == pytest.approx(3.0)
        assert asd == pytest.approx(3.0)

    def test_spacing_scales_distances(self):
        a = np.zeros((8, 8), dtype=np.int32)
        b = np.zeros((8, 8), dtype=np.int32)
        a[4, 2] = 1
        b[4, 5] = 1
        hd, asd = surface_distances(_lm(a), _lm(b), 1, (1.0, 2.5))
        assert hd == pytest.approx(7.5)
        assert asd == pytest.approx(7.5)

    def test_empty_surface_undefined(self):
        empty = _lm(np.zeros((5, 5), dtype=np.int32))
        full = _lm(np.eye(5, dtype=np.int32))
        hd, asd = surface_distances(empty, full, 1, (1.0, 1.0))
        assert math.isnan(hd) and math.isnan(asd)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        checked = 0
        for size in (6, 8, 12):
            for _ in range(15):
                pred, gt = _random_mask_pair(rng, size, p=0.25)
                got = surface_distances(pred, gt, 1, (1.0, 1.3))
                want = surface_distances_loop(pred.data, gt.data, 1, (1.0, 1.3))
                if math.isnan(want[0]):
                    assert math.isnan(got[0]) and math.isnan(got[1])
                    continue
                assert got[0] == pytest.approx(want[0], abs=1e-9)
                assert got[1] == pytest.approx(want[1], abs=1e-9)
                checked += 1
        assert checked >= 20

    def test_translation_invariance(self):
        base_p = np.zeros((16, 16), dtype=np.int32)
        base_g = np.zeros((16, 16), dtype=np.int32)
        base_p[2:6, 2:5] = 1
        base_g[3:7, 4:8] = 1
        ref = surface_distances(_lm(base_p), _lm(base_g), 1, (1.0, 1.0))
        shifted = surface_distances(
            _lm(np.roll(base_p, (4, 5), axis=(0, 1))), _lm(np.roll(base_g, (4, 5), axis=(0, 1))), 1, (1.0, 1.0)
        )
        assert shifted == pytest.approx(ref)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            pred, gt = _random_mask_pair(rng, 8)
            if not (pred.data == 1).any() or not (gt.data == 1).any():
                continue
            f = surface_distances(pred, gt, 1, (1.0, 1.0))
            r = surface_distances(gt, pred, 1, (1.0, 1.0))
            assert f == pytest.approx(r)

    def test_3d(self):
        a = np.zeros((4, 4, 4), dtype=np.int32)
        b = np.zeros((4, 4, 4), dtype=np.int32)
        a[1, 1, 1] = 1
        b[1, 1, 3] = 1
        hd, asd = surface_distances(_lm(a), _lm(b), 1, (1.0, 1.0, 2.0))
        assert hd == pytest.approx(4.0)
        assert asd == pytest.approx(4.0)


class TestEvaluateCase:
    def test_perfect_prediction(self):
        data = np.zeros((8, 8), dtype=np.int32)
        data[1:4, 1:4] = 1
        data[5:7, 5:7] = 2
        gt = LabelMap(data, 3)
        rec = evaluate_case(gt, gt, (1.0, 1.0))
        assert rec.dice == 1.0 and rec.jaccard == 1.0
        assert rec.hd95_mm == 0.0 and rec.asd_mm == 0.0

    def test_all_background_prediction(self):
        gt_data = np.zeros((6, 6), dtype=np.int32)
        gt_data[2:4, 2:4] = 1
        pred = LabelMap(np.zeros((6, 6), dtype=np.int32), 2)
        rec = evaluate_case(pred, LabelMap(gt_data, 2), (1.0, 1.0))
        assert rec.dice == 0.0 and rec.jaccard == 0.0
        assert math.isnan(rec.hd95_mm) and math.isnan(rec.asd_mm)

    def test_macro_is_mean_of_per_class(self):
        pred = np.zeros((10, 10), dtype=np.int32)
        gt = np.zeros((10, 10), dtype=np.int32)
        pred[0:3, 0:3] = 1
        gt[0:3, 1:4] = 1
        pred[6:9, 6:9] = 2
        gt[5:9, 6:9] = 2
        rec = evaluate_case(LabelMap(pred, 3), LabelMap(gt, 3), (1.0, 1.0))
        per = []
        for cls in (1, 2):
            d, j = dice_jaccard_sets(pred, gt, cls)
            hd, asd = surface_distances_loop(pred, gt, cls, (1.0, 1.0))
            per.append((d, j, hd, asd))
        assert rec.dice == pytest.approx(np.mean([p[0] for p in per]))
        assert rec.jaccard == pytest.approx(np.mean([p[1] for p in per]))
        assert rec.hd95_mm == pytest.approx(np.mean([p[2] for p in per]), abs=1e-9)
        assert rec.asd_mm == pytest.approx(np.mean([p[3] for p in per]), abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            evaluate_case(
                LabelMap(np.zeros((4, 4), dtype=np.int32), 2),
                LabelMap(np.zeros((5, 5), dtype=np.int32), 2),
                (1.0, 1.0),
            )


class TestReport:
    def test_csv_written(self, tmp_path):
        data = np.zeros((8, 8), dtype=np.int32)
        data[2:5, 2:5] = 1
        gt = LabelMap(data, 2)
        rec = evaluate_case(gt, gt, (1.0, 1.0))
        out = write_report([("case0", rec), ("case1", rec)], tmp_path / "rep.csv")
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("case_id,dice_c1,")
        assert len(lines) == 4  # header + 2 cases + mean row
        assert lines[-1].startswith("mean,")
