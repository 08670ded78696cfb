"""LSTM cell, Adam recurrence, init/dropout, and checkpoint round trips."""

import numpy as np
import pytest

from seglm.numeric import (
    AdamState,
    LRSchedule,
    LSTMParams,
    NonFiniteGradient,
    ParamStore,
    adam_update,
    clip_global_norm,
    dropout,
    init_params,
    load_checkpoint,
    logsigmoid,
    lstm_step,
    rng_from_json,
    rng_state_to_json,
    save_checkpoint,
    softmax,
)
from seglm.numeric import autodiff as ad

from helpers import finite_difference_grads, max_grad_relative_error


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _reference_lstm(wx, wh, b, x, h, c):
    """Straight-line evaluation of the cell equations, no graph machinery."""
    gates = x @ wx + h @ wh + b
    hsize = wh.shape[0]
    i, f, g, o = (gates[:, k * hsize : (k + 1) * hsize] for k in range(4))
    c_new = _sigmoid(f) * c + _sigmoid(i) * np.tanh(g)
    h_new = _sigmoid(o) * np.tanh(c_new)
    return h_new, c_new


class TestLSTM:
    def test_zero_weights_zero_state(self):
        """tanh(0)*sigmoid(0) = 0, so everything stays at zero."""
        store = ParamStore()
        p = LSTMParams(
            store.add("wx", np.zeros((2, 12))),
            store.add("wh", np.zeros((3, 12))),
            store.add("b", np.zeros(12)),
        )
        h, c = lstm_step(p, ad.constant(np.zeros((1, 2))),
                         ad.constant(np.zeros((1, 3))), ad.constant(np.zeros((1, 3))))
        assert np.all(h.data == 0.0)
        assert np.all(c.data == 0.0)

    def test_matches_reference_evaluation(self):
        rng = np.random.default_rng(7)
        wx, wh, b = rng.normal(size=(2, 12)), rng.normal(size=(3, 12)), rng.normal(size=12)
        x, h0, c0 = rng.normal(size=(1, 2)), rng.normal(size=(1, 3)), rng.normal(size=(1, 3))
        store = ParamStore()
        p = LSTMParams(store.add("wx", wx), store.add("wh", wh), store.add("b", b))
        h, c = lstm_step(p, ad.constant(x), ad.constant(h0), ad.constant(c0))
        h_ref, c_ref = _reference_lstm(wx, wh, b, x, h0, c0)
        np.testing.assert_allclose(h.data, h_ref, atol=1e-12)
        np.testing.assert_allclose(c.data, c_ref, atol=1e-12)

    def test_shape_mismatch_raises(self):
        store = ParamStore()
        p = LSTMParams(store.add("wx", np.zeros((2, 12))),
                       store.add("wh", np.zeros((3, 12))), store.add("b", np.zeros(12)))
        with pytest.raises(ValueError):
            lstm_step(p, ad.constant(np.zeros((1, 5))),
                      ad.constant(np.zeros((1, 3))), ad.constant(np.zeros((1, 3))))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(8)
        store = ParamStore()
        p = LSTMParams(
            store.add("wx", rng.normal(size=(2, 12)) * 0.4),
            store.add("wh", rng.normal(size=(3, 12)) * 0.4),
            store.add("b", rng.normal(size=12) * 0.4),
        )
        x = np.asarray(rng.normal(size=(2, 2)))
        h0 = np.zeros((2, 3))
        c0 = np.zeros((2, 3))

        def run():
            h, c = lstm_step(p, ad.constant(x), ad.constant(h0), ad.constant(c0))
            h, c = lstm_step(p, ad.constant(x), h, c)
            return ad.sum_all(ad.mul(h, h))

        loss = run()
        ad.backward(loss)
        analytic = store.gradients()
        numeric = finite_difference_grads(lambda: float(run().data), store)
        assert max_grad_relative_error(analytic, numeric) < 1e-7


class TestScalarOps:
    def test_softmax_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(3)), np.full(3, 1 / 3), atol=1e-12)

    def test_softmax_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            z = rng.normal(size=7) * 10
            p = softmax(z)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(p >= 0)
            shifted = softmax(z + 123.45)
            np.testing.assert_allclose(p, shifted, atol=1e-12)
            assert np.argmax(p) == np.argmax(shifted)

    def test_softmax_extreme_logits(self):
        p = softmax(np.asarray([1000.0, 0.0]))
        np.testing.assert_allclose(p, [1.0, 0.0], atol=1e-300)

    def test_logsigmoid_zero(self):
        assert logsigmoid(0.0) == pytest.approx(-np.log(2.0))

    def test_logsigmoid_stable_to_700(self):
        assert logsigmoid(700.0) == pytest.approx(0.0, abs=1e-300)
        assert logsigmoid(-700.0) == pytest.approx(-700.0)
        assert np.isfinite(logsigmoid(-700.0))


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        store = ParamStore()
        store.add("w", np.asarray([1.0, -2.0, 3.0]))
        before = store["w"].data.copy()
        state = AdamState(lr=0.1)
        for _ in range(3):
            adam_update(state, store, {"w": np.zeros(3)})
        np.testing.assert_array_equal(store["w"].data, before)

    def test_clip_rescales_global_norm(self):
        grads = {"a": np.asarray([6.0, 8.0])}  # norm 10
        clipped, norm = clip_global_norm(grads)
        assert norm == pytest.approx(10.0)
        assert np.linalg.norm(clipped["a"]) == pytest.approx(1.0)

    def test_clip_leaves_small_gradients_alone(self):
        grads = {"a": np.asarray([0.3, 0.4])}
        clipped, norm = clip_global_norm(grads)
        assert norm == pytest.approx(0.5)
        np.testing.assert_array_equal(clipped["a"], grads["a"])

    def test_matches_closed_form_recurrence(self):
        """Two steps on one scalar against the hand-evaluated update rule."""
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        theta = 1.0
        m = v = 0.0
        grads = [0.4, -0.7]
        expected = theta
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            expected -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)

        store = ParamStore()
        store.add("w", np.asarray(1.0))
        state = AdamState(lr=lr, beta1=b1, beta2=b2, eps=eps)
        for g in grads:
            adam_update(state, store, {"w": np.asarray(g)})
        assert float(store["w"].data) == pytest.approx(expected, rel=1e-12)

    def test_nonfinite_gradient_aborts(self):
        store = ParamStore()
        store.add("w", np.asarray(1.0))
        state = AdamState()
        with pytest.raises(NonFiniteGradient):
            adam_update(state, store, {"w": np.asarray(np.nan)})
        assert state.step == 0

    def test_lr_schedule_divides_by_four(self):
        state = AdamState(lr=0.01)
        sched = LRSchedule()
        assert sched.observe(state, 2.0)
        assert state.lr == pytest.approx(0.01)
        assert sched.observe(state, 2.5)  # worse: decay
        assert state.lr == pytest.approx(0.0025)
        assert sched.observe(state, 1.9)  # better: reset
        for i, expect_continue in enumerate([True, True, True, False]):
            assert sched.observe(state, 5.0) is expect_continue
        assert state.lr == pytest.approx(0.0025 / 4**4)


class TestInitDropout:
    def test_init_range_and_determinism(self):
        a = init_params((50, 50), np.random.default_rng(123))
        b = init_params((50, 50), np.random.default_rng(123))
        np.testing.assert_array_equal(a, b)
        assert np.all(np.abs(a) <= 0.08)
        assert np.std(a) > 0.01

    def test_eval_mode_identity(self):
        x = ad.constant(np.ones((3, 3)))
        assert dropout(x, 0.5, train=False) is x

    def test_rate_zero_identity(self):
        x = ad.constant(np.ones((3, 3)))
        assert dropout(x, 0.0, train=True, rng=np.random.default_rng(0)) is x

    def test_training_scales_kept_units(self):
        x = ad.constant(np.ones((200, 200)))
        y = dropout(x, 0.5, train=True, rng=np.random.default_rng(5))
        vals = np.unique(y.data)
        assert set(vals.tolist()) == {0.0, 2.0}
        assert y.data.mean() == pytest.approx(1.0, abs=0.05)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            dropout(ad.constant(np.ones(2)), 1.0, train=True, rng=np.random.default_rng(0))


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "model.ckpt"
        rng = np.random.default_rng(11)
        arrays = {
            "w": rng.normal(size=(3, 4)),
            "b": rng.normal(size=7),
            "scalar": np.asarray(3.5),
        }
        meta = {"step": 12, "lr": 0.0025, "rng": rng_state_to_json(rng)}
        save_checkpoint(path, arrays, meta)
        arrays2, meta2 = load_checkpoint(path)
        assert set(arrays2) == set(arrays)
        for name in arrays:
            np.testing.assert_array_equal(arrays[name], arrays2[name])
        assert meta2["step"] == 12
        restored = rng_from_json(meta2["rng"])
        np.testing.assert_array_equal(restored.integers(0, 1 << 30, 5),
                                      rng.integers(0, 1 << 30, 5))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTAMODEL" + b"\x00" * 32)
        from seglm.numeric import CheckpointError

        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_byte_identical_rewrites(self, tmp_path):
        arrays = {"w": np.arange(6.0).reshape(2, 3)}
        meta = {"seed": 1}
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, arrays, meta)
        save_checkpoint(p2, arrays, meta)
        assert p1.read_bytes() == p2.read_bytes()
