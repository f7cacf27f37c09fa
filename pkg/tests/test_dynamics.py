import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aoisa.aoi import ParameterError
from aoisa.dynamics import (
    AffineField,
    CallableField,
    DimensionError,
    LinearField,
    NoiseModel,
    QuadraticObjective,
    TableField,
    block_slices,
    eval_block,
    limit_drift_probe,
    regularize,
    sample_noise,
    scaled_drift,
    sgd_sample_drift,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_block_slices():
    assert block_slices((2, 1, 3)) == [slice(0, 2), slice(2, 3), slice(3, 6)]


def test_linear_block_access():
    f = LinearField([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [3.0, 0.0, -1.0]], blocks=(2, 1))
    x = np.array([1.0, 1.0, 2.0])
    assert f(x).tolist() == [3.0, 1.0, 1.0]
    assert eval_block(f, 2, x).tolist() == [1.0]
    with pytest.raises(DimensionError):
        f.block(3, x)
    with pytest.raises(DimensionError):
        f(np.ones(2))
    with pytest.raises(DimensionError):
        LinearField(np.eye(3), blocks=(1, 1))


def test_affine_limit_drops_offset():
    f = AffineField([[-2.0]], [4.0])
    assert f([1.0])[0] == 2.0
    assert scaled_drift(f, 100.0, [1.0])[0] == pytest.approx(-2.0 + 0.04)
    assert isinstance(f.limit, LinearField)
    assert f.limit([1.0])[0] == -2.0


def test_scaling_factor_below_one_rejected():
    f = AffineField([[-1.0]], [0.0])
    with pytest.raises(ParameterError):
        f.scaled(0.5)
    with pytest.raises(ParameterError):
        LinearField([[1.0]]).scaled(0.9)
    with pytest.raises(ParameterError):
        scaled_drift(f, 0.5, [1.0])


def test_callable_field_rows():
    f = CallableField(lambda x: -x**3, blocks=(2,))
    X = np.array([[1.0, 2.0], [0.0, -1.0]])
    np.testing.assert_array_equal(f.eval_many(X), -X**3)


def test_table_field_extrapolates_linearly():
    f = TableField([0.0, 1.0, 2.0], [0.0, -1.0, -3.0])
    assert f([0.5])[0] == -0.5
    assert f([-1.0])[0] == 1.0
    assert f([4.0])[0] == -7.0
    with pytest.raises(DimensionError):
        TableField([0.0, 0.0], [1.0, 2.0])


def test_regularized_field():
    base = LinearField([[-1.0, 0.0], [0.0, 0.0]])
    f = regularize(base, 0.25)
    assert f([2.0, 2.0]).tolist() == [-3.0, -1.0]
    with pytest.raises(ParameterError):
        regularize(base, -1)


def test_limit_probe_affine_converges():
    f = AffineField(np.array([[-1.0, 0.5], [0.0, -1.0]]), [3.0, -1.0])
    pr = limit_drift_probe(f, [1.0, 2.0], [1, 10, 1e4, 1e8, 1e9])
    assert pr.converged
    np.testing.assert_allclose(pr.limit, f.limit([1.0, 2.0]), atol=1e-7)
    with pytest.raises(ParameterError):
        limit_drift_probe(f, [1.0, 2.0], [10, 1])


def test_lipschitz_and_growth_checks():
    rng = np.random.default_rng(0)
    f = LinearField([[0.0, 2.0], [-1.0, 0.0]])
    assert f.check_lipschitz(rng) <= f.lipschitz + 1e-12
    assert f.check_growth(rng) <= f.growth + 1e-12


def test_noise_models():
    rng = np.random.default_rng(1)
    assert sample_noise(NoiseModel(), rng, np.ones(3)).tolist() == [0.0, 0.0, 0.0]
    u = NoiseModel("bounded-uniform", 2.0)
    z = np.array([0.0, 0.0])
    d = sample_noise(u, rng, z)
    assert np.all(np.abs(d) <= 2.0 * np.sqrt(3.0))
    with pytest.raises(ParameterError):
        NoiseModel("cauchy", 1.0)
    with pytest.raises(ParameterError):
        NoiseModel("gaussian-scaled", -1.0)


@pytest.mark.parametrize("kind", ["gaussian-scaled", "bounded-uniform"])
def test_noise_variance_matches_scale(kind):
    # per-coordinate variance K^2 (1 + |z|^2)
    nm = NoiseModel(kind, 0.5)
    rng = np.random.default_rng(7)
    z = np.array([1.0, 2.0])
    draws = nm.amplitude(z @ z) * nm.base_draws(rng, (200_000, 2))
    np.testing.assert_allclose(draws.var(axis=0), 0.25 * 6.0, rtol=0.02)
    np.testing.assert_allclose(draws.mean(axis=0), 0.0, atol=0.02)


def test_quadratic_objective_means():
    obj = QuadraticObjective([0.5, 1.5], [1.0, 3.0])
    assert obj.mean_hessian.tolist() == [[2.0]]
    assert obj.minimizer().tolist() == [-1.0]
    assert obj.min_eigenvalue() == 2.0
    assert obj.drift()([0.0])[0] == -2.0
    assert obj.F([-1.0]) == -1.0


def test_quadratic_objective_validation():
    with pytest.raises(ParameterError):
        QuadraticObjective([1.0], [1.0], A_probs=[0.5])
    with pytest.raises(DimensionError):
        QuadraticObjective(np.eye(2), [[1.0, 2.0, 3.0]])
    with pytest.raises(DimensionError):
        QuadraticObjective(np.eye(2), [[1.0, 2.0]], blocks=(1, 2))


def test_sample_gradient_is_unbiased():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 2, 2))
    b = rng.normal(size=(4, 2))
    obj = QuadraticObjective(A, b, A_probs=[0.2, 0.3, 0.5], blocks=(1, 1))
    x = np.array([0.7, -1.2])
    exact = np.zeros(2)
    for i, pa in enumerate(obj.A_probs):
        for j, pb in enumerate(obj.b_probs):
            exact += pa * pb * obj.gradient(x, i, j)
    np.testing.assert_allclose(-exact, obj.drift()(x), rtol=1e-12)
    ag = np.mean([sgd_sample_drift(obj, 2, x, rng) for _ in range(20_000)], axis=0)
    assert ag[0] == pytest.approx(obj.drift()(x)[1], abs=0.05)


@settings(max_examples=50, deadline=None)
@given(
    arrays(float, (3, 3), elements=finite),
    arrays(float, 3, elements=finite),
    arrays(float, 3, elements=finite),
    st.floats(1.0, 1e6),
)
def test_scaled_affine_formula(M, v, x, c):
    f = AffineField(M, v)
    np.testing.assert_allclose(f.scaled(c)(x), M @ x + v / c, rtol=1e-9, atol=1e-9 * (1 + np.abs(M).sum() * 50))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (2, 2), elements=finite), arrays(float, (5, 2), elements=finite))
def test_eval_many_matches_rowwise(M, X):
    f = LinearField(M)
    rows = np.array([f(x) for x in X])
    np.testing.assert_array_equal(f.eval_many(X), rows)
