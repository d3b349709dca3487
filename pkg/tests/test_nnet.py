import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replearn.nnet import (
    LayerSpec,
    MlpSpec,
    ShapeError,
    backward,
    forward,
    init_params,
    param_count,
)

from _oracles import central_difference, extended_forward, gradient_mismatch, naive_forward


def random_spec(rng, max_layers=3, max_width=6):
    n_layers = int(rng.integers(1, max_layers + 1))
    widths = [int(w) for w in rng.integers(1, max_width + 1, size=n_layers + 1)]
    acts = [str(a) for a in rng.choice(["sigmoid", "tanh", "identity"], size=n_layers)]
    return MlpSpec(tuple(LayerSpec(widths[i], widths[i + 1], acts[i]) for i in range(n_layers)))


class TestSpec:
    def test_param_counts(self):
        assert param_count(MlpSpec.from_widths([10, 12, 2])) == 158
        assert param_count(MlpSpec.from_widths([3, 1], "identity")) == 4
        assert param_count(MlpSpec.from_widths([10, 8, 8, 2])) == 178

    def test_widths_must_chain(self):
        with pytest.raises(ValueError):
            MlpSpec((LayerSpec(3, 4), LayerSpec(5, 1)))

    def test_empty_and_degenerate(self):
        with pytest.raises(ValueError):
            MlpSpec(())
        with pytest.raises(ValueError):
            LayerSpec(0, 3)
        with pytest.raises(ValueError):
            LayerSpec(2, 3, "relu")

    def test_dict_round_trip(self):
        spec = MlpSpec.from_widths([4, 3, 1], "tanh", "identity")
        assert MlpSpec.from_dict(spec.to_dict()) == spec


class TestForward:
    def test_zero_params_sigmoid_is_half(self):
        spec = MlpSpec.from_widths([10, 8, 8, 2])
        acts = forward(spec, np.zeros(param_count(spec)), np.ones(10))
        for a in acts[1:]:
            np.testing.assert_array_equal(a, 0.5)
        assert len(acts) == 4

    def test_single_identity_layer(self):
        spec = MlpSpec.from_widths([2, 1], "identity")
        out = forward(spec, np.array([1.0, 2.0, 0.5]), np.array([3.0, -1.0]))[-1]
        np.testing.assert_allclose(out, [1.5])

    def test_matches_naive_recurrence(self):
        rng = np.random.default_rng(7)
        spec = MlpSpec.from_widths([10, 8, 2])
        for _ in range(20):
            w = rng.uniform(-2, 2, param_count(spec))
            x = np.zeros(10)
            start, length = rng.integers(0, 10), rng.integers(1, 5)
            x[(start + np.arange(length)) % 10] = 1
            got = forward(spec, w, x)[-1]
            want = naive_forward(spec.widths, ["sigmoid"] * 2, w, x)
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_batch_and_stacked_agree_with_single(self):
        rng = np.random.default_rng(3)
        spec = MlpSpec.from_widths([3, 4, 2], "tanh")
        W = rng.normal(size=(5, param_count(spec)))
        X = rng.normal(size=(5, 7, 3))
        stacked = forward(spec, W, X)[-1]
        for s in range(5):
            batch = forward(spec, W[s], X[s])[-1]
            np.testing.assert_allclose(stacked[s], batch, atol=1e-14)
            np.testing.assert_allclose(batch[2], forward(spec, W[s], X[s, 2])[-1], atol=1e-14)

    def test_shape_errors(self):
        spec = MlpSpec.from_widths([3, 1])
        with pytest.raises(ShapeError):
            forward(spec, np.zeros(4), np.zeros(2))
        with pytest.raises(ShapeError):
            forward(spec, np.zeros(5), np.zeros(3))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_output_ranges(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(4, 3)) * 5
        for act, lo, hi in (("sigmoid", 0.0, 1.0), ("tanh", -1.0, 1.0)):
            spec = MlpSpec.from_widths([3, 5, 2], act)
            out = forward(spec, rng.uniform(-3, 3, param_count(spec)), x)[-1]
            assert np.all(out > lo) and np.all(out < hi)


class TestBackward:
    def test_zero_upstream(self):
        spec = MlpSpec.from_widths([4, 3, 2])
        w = init_params(spec, 1, 1.0)
        g, gx = backward(spec, w, np.ones(4), np.zeros(2))
        assert not g.any() and not gx.any()

    def test_identity_layer_weight_gradient(self):
        spec = MlpSpec.from_widths([3, 2], "identity")
        x = np.array([0.5, -2.0, 3.0])
        up = np.array([1.5, -0.25])
        g, _ = backward(spec, np.zeros(8), x, up)
        W_grad = g[:6].reshape(2, 3)
        np.testing.assert_allclose(W_grad, np.outer(up, x))
        np.testing.assert_allclose(g[6:], up)

    def test_finite_difference_random_cases(self):
        rng = np.random.default_rng(2024)
        for case in range(100):
            spec = random_spec(rng)
            w = rng.uniform(-1.5, 1.5, param_count(spec))
            x = rng.normal(size=spec.n_inputs)
            up = rng.normal(size=spec.n_outputs)
            g, gx = backward(spec, w, x, up)
            num = central_difference(lambda p: extended_forward(spec, p, x[None])[0] @ up, w, dtype=np.longdouble)
            num_x = central_difference(lambda z: extended_forward(spec, w, z[None])[0] @ up, x, dtype=np.longdouble)
            assert gradient_mismatch(g, num) == [], f"case {case}"
            assert gradient_mismatch(gx, num_x) == [], f"case {case}"

    def test_batch_gradient_is_sum(self):
        rng = np.random.default_rng(5)
        spec = MlpSpec.from_widths([3, 4, 2])
        w = rng.normal(size=param_count(spec))
        X = rng.normal(size=(6, 3))
        U = rng.normal(size=(6, 2))
        g, gx = backward(spec, w, X, U)
        parts = [backward(spec, w, X[i], U[i]) for i in range(6)]
        np.testing.assert_allclose(g, sum(p[0] for p in parts), atol=1e-13)
        np.testing.assert_allclose(gx, np.stack([p[1] for p in parts]), atol=1e-13)

    def test_upstream_shape_error(self):
        spec = MlpSpec.from_widths([3, 2])
        with pytest.raises(ShapeError):
            backward(spec, np.zeros(8), np.zeros(3), np.zeros(3))


class TestInit:
    def test_deterministic_and_bounded(self):
        spec = MlpSpec.from_widths([10, 8, 8, 2])
        a = init_params(spec, 11, 0.5)
        b = init_params(spec, 11, 0.5)
        assert a.tobytes() == b.tobytes()
        assert np.all(np.abs(a) <= 0.5)

    def test_seeds_differ(self):
        spec = MlpSpec.from_widths([10, 8, 8, 2])
        assert np.any(init_params(spec, 1) != init_params(spec, 2))

    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            init_params(MlpSpec.from_widths([2, 1]), 0, 0.0)
