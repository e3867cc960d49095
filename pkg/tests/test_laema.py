import math

import numpy as np
import pytest

from dualseg.datamodel import ParameterTree
from dualseg.errors import CongruenceError, ValidationError
from dualseg.laema import (
    MODE_LA,
    MODE_STANDARD,
    LAEMAConfig,
    LAEMAState,
    advance,
    decay_weight,
    ema_update,
    global_weight,
    la_ema_weight,
)


class TestGlobalWeight:
    def test_t0_is_one(self):
        for w_max in (0.01, 0.5, 1.0):
            assert global_weight(0, w_max) == 1.0

    def test_floor_reached(self):
        # 1/100 == w_max exactly at t = 99
        assert global_weight(99, 0.01) == 0.01
        assert global_weight(1000, 0.01) == 0.01

    def test_intermediate(self):
        assert global_weight(3, 0.01) == 0.25

    def test_non_increasing(self):
        vals = [global_weight(t, 0.01) for t in range(200)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_negative_t_rejected(self):
        with pytest.raises(ValidationError):
            global_weight(-1, 0.01)


class TestDecayWeight:
    def test_zero_loss(self):
        assert decay_weight(0.0, 0.3) == 1.0

    def test_known_value(self):
        assert decay_weight(2.0, 0.3) == pytest.approx(math.exp(-0.6), rel=1e-15)

    def test_lambda_zero(self):
        for loss in (0.0, 1.0, 100.0):
            assert decay_weight(loss, 0.0) == 1.0

    def test_negative_loss_rejected(self):
        with pytest.raises(ValidationError):
            decay_weight(-0.1, 0.3)

    def test_range(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            w = decay_weight(float(rng.uniform(0, 50)), float(rng.uniform(0, 2)))
            assert 0.0 < w <= 1.0


class TestLaEmaWeight:
    def test_t0_loss0(self):
        assert la_ema_weight(0, 0.0, LAEMAConfig()) == 1.0

    def test_product_of_components(self):
        cfg = LAEMAConfig(w_max=0.01, lambda_=0.3)
        got = la_ema_weight(99, 2.0, cfg)
        assert got == pytest.approx(0.01 * math.exp(-0.6), rel=1e-15)
        assert got == pytest.approx(global_weight(99, 0.01) * decay_weight(2.0, 0.3), rel=1e-15)

    def test_standard_mode_ignores_loss(self):
        cfg = LAEMAConfig(w_max=0.01, lambda_=0.3, mode=MODE_STANDARD)
        assert la_ema_weight(5, 100.0, cfg) == global_weight(5, 0.01)

    def test_la_below_standard_for_positive_loss(self):
        la = LAEMAConfig(w_max=0.01, lambda_=0.3, mode=MODE_LA)
        std = LAEMAConfig(w_max=0.01, lambda_=0.3, mode=MODE_STANDARD)
        for t in (0, 3, 50, 99, 500):
            assert la_ema_weight(t, 1.5, la) < la_ema_weight(t, 1.5, std)

    def test_lambda_zero_equals_standard(self):
        la = LAEMAConfig(w_max=0.05, lambda_=0.0, mode=MODE_LA)
        std = LAEMAConfig(w_max=0.05, lambda_=0.0, mode=MODE_STANDARD)
        rng = np.random.default_rng(1)
        for _ in range(50):
            t = int(rng.integers(0, 1000))
            loss = float(rng.uniform(0, 10))
            assert la_ema_weight(t, loss, la) == la_ema_weight(t, loss, std)

    def test_weight_ordering_invariants(self):
        cfg = LAEMAConfig(w_max=0.01, lambda_=0.3)
        rng = np.random.default_rng(2)
        for _ in range(100):
            t = int(rng.integers(0, 500))
            loss = float(rng.uniform(0, 10))
            w = la_ema_weight(t, loss, cfg)
            wg = global_weight(t, cfg.w_max)
            assert 0.0 < w <= wg <= 1.0

    def test_strictly_decreasing_in_loss(self):
        cfg = LAEMAConfig(lambda_=0.3)
        losses = np.linspace(0, 5, 20)
        ws = [la_ema_weight(7, float(l), cfg) for l in losses]
        assert all(a > b for a, b in zip(ws, ws[1:]))

    def test_variance_ordering(self):
        la = LAEMAConfig(w_max=0.01, lambda_=0.3, mode=MODE_LA)
        std = LAEMAConfig(w_max=0.01, lambda_=0.3, mode=MODE_STANDARD)
        for t in (0, 9, 99):
            w_la = la_ema_weight(t, 2.0, la)
            w_std = la_ema_weight(t, 2.0, std)
            assert w_la**2 < w_std**2


class TestAdvance:
    def test_counts_and_weights(self):
        cfg = LAEMAConfig(w_max=0.01, lambda_=0.3)
        state = LAEMAState()
        state, w = advance(state, 2.0, cfg)
        assert state.t == 1
        assert w == pytest.approx(math.exp(-0.6))
        assert state.last_w == w
        assert state.last_w_global == 1.0
        assert state.last_w_decay == pytest.approx(math.exp(-0.6))
        assert 0 < state.last_w <= state.last_w_global <= 1.0

    def test_standard_mode_records_unit_decay(self):
        cfg = LAEMAConfig(mode=MODE_STANDARD)
        state, w = advance(LAEMAState(t=4), 3.0, cfg)
        assert state.last_w_decay == 1.0
        assert w == global_weight(4, cfg.w_max)


class TestEmaUpdate:
    def _tree(self, values):
        return ParameterTree([("w", np.array(values, dtype=np.float32))])

    def test_full_transfer(self):
        t = self._tree([1.0, 2.0])
        s = self._tree([5.0, -3.0])
        out = ema_update(t, s, 1.0)
        np.testing.assert_array_equal(out.array("w"), s.array("w"))

    def test_fixed_point(self):
        t = self._tree([1.0, 2.0, 3.0])
        out = ema_update(t, t, 0.3)
        np.testing.assert_allclose(out.array("w"), t.array("w"), rtol=1e-6)

    def test_scalar_case(self):
        out = ema_update(self._tree([0.0]), self._tree([10.0]), 0.25)
        np.testing.assert_allclose(out.array("w"), [2.5])

    def test_weight_bounds(self):
        t = self._tree([1.0])
        with pytest.raises(ValidationError):
            ema_update(t, t, 0.0)
        with pytest.raises(ValidationError):
            ema_update(t, t, 1.5)

    def test_incongruent_trees(self):
        a = self._tree([1.0])
        b = ParameterTree([("v", np.array([1.0], dtype=np.float32))])
        with pytest.raises(CongruenceError):
            ema_update(a, b, 0.5)

    def test_deviation_contraction(self):
        # teacher at a fixed point, student displaced by eps: after one update
        # the deviation is exactly w * eps, entrywise
        rng = np.random.default_rng(3)
        theta = rng.normal(size=8).astype(np.float64)
        eps = rng.normal(size=8).astype(np.float64)
        teacher = ParameterTree([("w", theta)])
        student = ParameterTree([("w", theta + eps)])
        for w in (0.01, 0.3, 1.0):
            out = ema_update(teacher, student, w)
            np.testing.assert_allclose(out.array("w") - theta, w * eps, rtol=1e-12)


class TestConfig:
    def test_defaults(self):
        cfg = LAEMAConfig()
        assert cfg.w_max == 0.01
        assert cfg.lambda_ == 0.3
        assert cfg.mode == MODE_LA

    def test_validation(self):
        with pytest.raises(ValidationError):
            LAEMAConfig(w_max=0.0)
        with pytest.raises(ValidationError):
            LAEMAConfig(w_max=1.5)
        with pytest.raises(ValidationError):
            LAEMAConfig(lambda_=-0.1)
        with pytest.raises(ValidationError):
            LAEMAConfig(mode="exotic")
