import numpy as np
import pytest

import aoisa.apps as apps
from aoisa.aoi import AoiModel, ParameterError
from aoisa.apps import (
    MomentumExperiment,
    SgdExperiment,
    batched,
    block_quadratic,
    run_momentum_experiment,
    run_sgd_experiment,
    scalar_quadratic,
)
from aoisa.dynamics import LinearField, NoiseModel, QuadraticObjective
from aoisa.schedule import StepSchedule


def test_scalar_quadratic_minimizer():
    obj = scalar_quadratic()
    assert obj.minimizer().tolist() == [-1.0]
    assert obj.min_eigenvalue() == 2.0


def test_block_quadratic_spectrum():
    obj = block_quadratic(3, 2)
    ev = np.linalg.eigvalsh(obj.mean_hessian)
    assert 1.0 < ev.min() and ev.max() < 3.0
    assert obj.blocks == (2, 2, 2)
    # the two A samples differ, so the gradient noise is state dependent
    assert not np.allclose(obj.A_support[0], obj.A_support[1])


def test_batched_splits_by_budget():
    assert list(batched(range(5), 10, 2, budget=40)) == [[0, 1], [2, 3], [4]]
    assert list(batched([7], 10**9, 10, budget=1)) == [[7]]


def test_sgd_experiment_validation():
    bad = QuadraticObjective([-1.0, 0.5], [1.0])
    with pytest.raises(ParameterError, match="positive definite"):
        SgdExperiment(bad)
    with pytest.raises(ParameterError):
        SgdExperiment(scalar_quadratic(), p=1.5, schedule=StepSchedule())
    assert SgdExperiment(scalar_quadratic(), p=1.5).schedule.regime == "power"


def test_sgd_regression_pinned():
    spec = SgdExperiment(block_quadratic(2, 1), AoiModel.bernoulli(0.3), p=1.0, horizon=2000, replications=3, seed=0)
    rep = run_sgd_experiment(spec)
    got = [r.final_error for r in rep.rows]
    np.testing.assert_allclose(got, [0.023436017420014735, 0.005832675448340685, 0.01630582975100929], rtol=1e-12)
    assert [r.seed for r in rep.rows] == [0, 1, 2]


def test_sgd_report_and_histories():
    hist = []
    spec = SgdExperiment(scalar_quadratic(), AoiModel.bernoulli(0.2), horizon=5000, replications=4, seed=3, error_tol=0.05)
    rep = run_sgd_experiment(spec, hist)
    assert len(hist) == 4 and [h.seed for h in hist] == [3, 4, 5, 6]
    assert rep.checks == {"no_divergence": True, "bounded": True, "median_error": True}
    text = rep.summary_text()
    assert "verdict = pass" in text and "check.bounded = pass" in text
    assert rep.csv_text().splitlines()[0] == "seed,verdict,final_error,max_norm,final_window_sum,max_delta_tail"


def test_sgd_batching_does_not_change_results(monkeypatch):
    spec = dict(objective=block_quadratic(2, 1), delays=AoiModel.pareto(0.7), p=0.6, horizon=1500, replications=3, seed=1)
    whole = run_sgd_experiment(SgdExperiment(**spec))
    monkeypatch.setattr(apps, "BATCH_BUDGET", 1)
    assert len(list(batched([1, 2, 3], 1500, 2))) == 3
    split = run_sgd_experiment(SgdExperiment(**spec))
    assert [r.final_error for r in whole.rows] == [r.final_error for r in split.rows]
    assert whole.config_hash == split.config_hash


def test_momentum_beta_zero_twins_coincide():
    rep = run_momentum_experiment(MomentumExperiment(0.0, objective=scalar_quadratic(), horizon=3000, replications=3, gap_tol=0.0))
    assert rep.summary["max_twin_gap"] == 0.0
    assert rep.passed


def test_momentum_field_and_noise():
    f = LinearField([[-1.0, 0.5], [-0.5, -1.0]], blocks=(1, 1))
    rep = run_momentum_experiment(
        MomentumExperiment(0.5, field=f, noise=NoiseModel("bounded-uniform", 0.3), delays=AoiModel.bernoulli(0.3),
                           horizon=20_000, replications=2, n0=1000, gap_tol=0.05, delta_tol=1e-3)
    )
    assert rep.checks["no_divergence"]
    assert rep.checks["twin_gap"]
    assert rep.checks["delta_tail"]
    assert len(rep.extra_rows) == 2


def test_momentum_rejects_power_schedule():
    with pytest.raises(ParameterError):
        MomentumExperiment(0.5, objective=scalar_quadratic(), schedule=StepSchedule.for_moment(1.5))
    with pytest.raises(ParameterError):
        MomentumExperiment(1.0, objective=scalar_quadratic())
