import numpy as np
import pytest

from replearn.composite import (
    CompositeParams,
    CompositeSpec,
    empirical_loss,
    gradient,
    init_composite,
    joint_objective,
    loss_and_gradient,
    per_task_loss,
    predict,
    predict_all,
)
from replearn.environment import Environment, NMSample, sample_nm
from replearn.nnet import LayerSpec, MlpSpec, ShapeError, param_count

from _oracles import (
    brute_force_composite_loss,
    central_difference,
    extended_composite_loss,
    gradient_mismatch,
    naive_composite_output,
)

ENV = Environment()
SPEC = CompositeSpec(MlpSpec.from_widths([10, 8, 8, 2]), MlpSpec.from_widths([2, 4, 1]), 3)


def random_params(spec, rng, scale=1.0):
    return CompositeParams(
        rng.uniform(-scale, scale, spec.trunk_size),
        rng.uniform(-scale, scale, (spec.n_heads, spec.head_size)),
    )


def test_spec_validation():
    with pytest.raises(ValueError):
        CompositeSpec(MlpSpec.from_widths([10, 3]), MlpSpec.from_widths([2, 1]))
    with pytest.raises(ValueError):
        CompositeSpec(MlpSpec.from_widths([10, 2]), MlpSpec.from_widths([2, 1]), 0)
    assert SPEC.n_params == 178 + 3 * 17
    assert CompositeSpec.from_dict(SPEC.to_dict()) == SPEC


class TestPredict:
    def test_zero_network_is_half(self):
        params = CompositeParams(np.zeros(SPEC.trunk_size), np.zeros((3, SPEC.head_size)))
        for x in ENV.input_list[:5]:
            assert predict(SPEC, params, 1, np.array(x)) == 0.5

    def test_identity_trunk(self):
        trunk = MlpSpec((LayerSpec(3, 3, "identity"),))
        head = MlpSpec.from_widths([3, 2, 1])
        spec = CompositeSpec(trunk, head, 1)
        tp = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
        rng = np.random.default_rng(0)
        hp = rng.normal(size=param_count(head))
        x = rng.normal(size=3)
        want = naive_composite_output(MlpSpec((LayerSpec(3, 3, "identity"),)), head, tp, hp, x)
        assert predict(spec, CompositeParams(tp, hp[None]), 0, x) == pytest.approx(want, abs=1e-12)

    def test_matches_two_naive_forwards(self):
        rng = np.random.default_rng(1)
        params = random_params(SPEC, rng)
        for j in rng.integers(0, 40, size=10):
            x = ENV.inputs[j]
            for t in range(3):
                want = naive_composite_output(SPEC.trunk, SPEC.head, params.trunk, params.heads[t], x)
                assert predict(SPEC, params, t, x) == pytest.approx(want, abs=1e-12)

    def test_predict_all(self):
        rng = np.random.default_rng(2)
        params = random_params(SPEC, rng)
        out = predict_all(SPEC, params, ENV.inputs)
        assert out.shape == (3, 40)
        assert out[2, 17] == pytest.approx(predict(SPEC, params, 2, ENV.inputs[17]), abs=1e-14)

    def test_task_index_error(self):
        params = init_composite(SPEC, 0)
        with pytest.raises(IndexError):
            predict(SPEC, params, 3, ENV.inputs[0])


class TestLoss:
    def test_perfect_predictions(self):
        # identity-output head fed by a constant trunk reproduces a constant label row
        trunk = MlpSpec.from_widths([10, 1], "identity")
        head = MlpSpec.from_widths([1, 1], "identity")
        spec = CompositeSpec(trunk, head, 2)
        params = CompositeParams(np.zeros(11), np.array([[0.0, 1.0], [0.0, 0.0]]))
        sample = NMSample(np.array([0, 1]), ENV.inputs[None, :4].repeat(2, 0), np.array([[1.0] * 4, [0.0] * 4]))
        assert empirical_loss(spec, params, sample) == 0.0

    def test_constant_half(self):
        params = CompositeParams(np.zeros(SPEC.trunk_size), np.zeros((3, SPEC.head_size)))
        sample = sample_nm(ENV, 3, 6, seed=4)
        assert empirical_loss(SPEC, params, sample) == pytest.approx(0.25, abs=1e-15)

    def test_brute_force(self):
        rng = np.random.default_rng(3)
        spec = SPEC.with_heads(3)
        params = random_params(spec, rng)
        sample = sample_nm(ENV, 3, 5, seed=5)
        want = brute_force_composite_loss(
            spec.trunk, spec.head, params.trunk, params.heads, sample.inputs, sample.labels
        )
        assert empirical_loss(spec, params, sample) == pytest.approx(want, abs=1e-12)

    def test_average_of_per_task_losses(self):
        rng = np.random.default_rng(4)
        params = random_params(SPEC, rng)
        sample = sample_nm(ENV, 3, 9, seed=6)
        per = [per_task_loss(SPEC, params, i, sample.row(i)) for i in range(3)]
        assert empirical_loss(SPEC, params, sample) == pytest.approx(np.mean(per), abs=1e-15)

    def test_per_task_equals_loss_for_one_head(self):
        spec = SPEC.with_heads(1)
        rng = np.random.default_rng(5)
        params = random_params(spec, rng)
        sample = sample_nm(ENV, 1, 12, seed=7)
        assert per_task_loss(spec, params, 0, sample.row(0)) == pytest.approx(
            empirical_loss(spec, params, sample), abs=1e-15
        )

    def test_per_task_brute_force(self):
        rng = np.random.default_rng(6)
        params = random_params(SPEC, rng)
        sample = sample_nm(ENV, 3, 7, seed=8)
        row = sample.row(1)
        want = np.mean(
            [(naive_composite_output(SPEC.trunk, SPEC.head, params.trunk, params.heads[1], x) - y) ** 2 for x, y in row]
        )
        assert per_task_loss(SPEC, params, 1, row) == pytest.approx(want, abs=1e-12)

    def test_per_task_empty_row(self):
        with pytest.raises(ValueError):
            per_task_loss(SPEC, init_composite(SPEC, 0), 0, [])

    def test_bounded_by_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            params = random_params(SPEC, rng, scale=5.0)
            sample = sample_nm(ENV, 3, 8, seed=int(rng.integers(1 << 30)))
            assert 0.0 <= empirical_loss(SPEC, params, sample) <= 1.0

    def test_head_permutation_invariance(self):
        rng = np.random.default_rng(8)
        params = random_params(SPEC, rng)
        sample = sample_nm(ENV, 3, 6, seed=9)
        perm = [2, 0, 1]
        permuted = NMSample(sample.task_ids[perm], sample.inputs[perm], sample.labels[perm])
        pp = CompositeParams(params.trunk, params.heads[perm])
        assert empirical_loss(SPEC, pp, permuted) == pytest.approx(
            empirical_loss(SPEC, params, sample), abs=1e-15
        )

    def test_row_count_mismatch(self):
        with pytest.raises(ShapeError):
            empirical_loss(SPEC, init_composite(SPEC, 0), sample_nm(ENV, 2, 3, seed=0))


class TestGradient:
    def test_finite_differences(self):
        rng = np.random.default_rng(10)
        for case in range(50):
            n = int(rng.integers(1, 4))
            spec = SPEC.with_heads(n)
            params = random_params(spec, rng)
            sample = sample_nm(ENV, n, int(rng.integers(1, 6)), seed=case)
            loss = extended_composite_loss(spec.trunk, spec.head, n, sample.inputs, sample.labels)
            g = gradient(spec, params, sample).flatten()
            num = central_difference(loss, params.flatten(), dtype=np.longdouble)
            assert gradient_mismatch(g, num) == [], f"case {case}"

    def test_joint_objective_matches_structured_api(self):
        rng = np.random.default_rng(3)
        params = random_params(SPEC, rng)
        sample = sample_nm(ENV, 3, 4, seed=3)
        loss, grad = joint_objective(SPEC, sample)
        assert loss(params.flatten()) == empirical_loss(SPEC, params, sample)
        np.testing.assert_array_equal(grad(params.flatten()), gradient(SPEC, params, sample).flatten())

    def test_identical_rows_match_single_task(self):
        rng = np.random.default_rng(11)
        one = SPEC.with_heads(1)
        p1 = random_params(one, rng)
        s1 = sample_nm(ENV, 1, 6, seed=12)
        n = 4
        pn = CompositeParams(p1.trunk, np.repeat(p1.heads, n, axis=0))
        sn = NMSample(np.repeat(s1.task_ids, n), np.repeat(s1.inputs, n, 0), np.repeat(s1.labels, n, 0))
        g1 = gradient(one, p1, s1)
        gn = gradient(SPEC.with_heads(n), pn, sn)
        np.testing.assert_allclose(gn.trunk, g1.trunk, rtol=1e-13, atol=1e-16)
        # each head carries 1/n of the single-task head gradient
        np.testing.assert_allclose(gn.heads * n, np.repeat(g1.heads, n, 0), rtol=1e-13, atol=1e-16)

    def test_duplicating_tasks_halves_head_gradient(self):
        rng = np.random.default_rng(12)
        spec = SPEC.with_heads(2)
        params = random_params(spec, rng)
        s = sample_nm(ENV, 2, 5, seed=13)
        doubled = NMSample(np.tile(s.task_ids, 2), np.tile(s.inputs, (2, 1, 1)), np.tile(s.labels, (2, 1)))
        pd = CompositeParams(params.trunk, np.tile(params.heads, (2, 1)))
        g = gradient(spec, params, s)
        gd = gradient(SPEC.with_heads(4), pd, doubled)
        np.testing.assert_allclose(gd.heads[:2], g.heads / 2, rtol=1e-13, atol=1e-17)
        np.testing.assert_allclose(gd.trunk, g.trunk, rtol=1e-13, atol=1e-17)

    def test_loss_and_gradient_consistent(self):
        rng = np.random.default_rng(13)
        params = random_params(SPEC, rng)
        s = sample_nm(ENV, 3, 4, seed=14)
        loss, g = loss_and_gradient(SPEC, params, s)
        assert loss == empirical_loss(SPEC, params, s)
        assert np.array_equal(g.flatten(), gradient(SPEC, params, s).flatten())


def test_flat_round_trip():
    p = init_composite(SPEC, 3)
    q = CompositeParams.from_flat(SPEC, p.flatten())
    assert np.array_equal(q.trunk, p.trunk) and np.array_equal(q.heads, p.heads)
    with pytest.raises(ShapeError):
        CompositeParams.from_flat(SPEC, np.zeros(5))
