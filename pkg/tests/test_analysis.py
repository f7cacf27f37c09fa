import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from aoisa import analysis as an
from aoisa.aoi import AoiModel, ParameterError, trace
from aoisa.dynamics import AffineField, LinearField, NoiseModel
from aoisa.engine import SimConfig, delay_matrix, run
from aoisa.schedule import CustomSchedule, StepSchedule, TimeAxis

ROT = np.array([[-1.0, 0.5], [-0.5, -1.0]])


# -- interpolation and rescaling ----------------------------------------------


def test_interpolated_path_knots_and_midpoints():
    ax = TimeAxis(StepSchedule())
    x = np.array([[0.0], [2.0], [5.0], [6.0]])
    p = an.InterpolatedPath(ax, x)
    # knots t = 0, 1, 1.5, 1.8333
    for n in range(4):
        assert p(ax.t(n + 1))[0] == x[n, 0]
    assert p(0.5)[0] == 1.0
    assert p(1.25)[0] == 3.5
    with pytest.raises(ParameterError):
        p(5.0)


def test_rescaling_uses_running_max_at_segment_starts():
    ax = TimeAxis(CustomSchedule(lambda n: 1.0, validate=False), T=2.0)
    cfg = SimConfig(LinearField([[1.0]]), CustomSchedule(lambda n: 1.0, validate=False), 8, [0.5])
    h = run(cfg)  # x_n = 0.5 * 2**(n-1)
    rp = an.build_rescaled(h, ax)
    assert rp.starts.tolist() == [1, 3, 5, 7]
    # |x| at n = 1, 3, 5, 7 is 0.5, 2, 8, 32; s = max(running max, 1)
    assert rp.s.tolist() == [1.0, 2.0, 8.0, 32.0]
    np.testing.assert_array_equal(rp.xhat[:, 0], h.x[:, 0] / rp.s[rp.seg])


def test_zeta_is_weighted_noise_sum():
    f = LinearField(ROT, blocks=(1, 1))
    cfg = SimConfig(f, StepSchedule(), 300, [2.0, -1.0], noise=NoiseModel("gaussian-scaled", 0.5), seed=1)
    h = run(cfg)
    rp = an.build_rescaled(h, TimeAxis(cfg.schedule, horizon=300), f)
    n = 120
    want = sum(rp.steps[k - 1] * rp.Mhat[k - 1] for k in range(1, n))
    np.testing.assert_allclose(rp.zeta[n - 1], want, rtol=1e-12)


# -- ODE ----------------------------------------------------------------------


def test_rk4_matches_matrix_exponential():
    x0 = np.array([1.0, -2.0])
    sol = an.ode_solve(lambda x: ROT @ x, x0, 0.0, 3.0, 1e-2)
    np.testing.assert_allclose(sol.end, expm(3.0 * ROT) @ x0, atol=1e-9)
    # dense output agrees at interior knots
    np.testing.assert_allclose(sol(1.5), expm(1.5 * ROT) @ x0, atol=1e-9)


def test_rk4_fourth_order():
    errs = [abs(an.ode_solve(lambda x: -x, [1.0], 0.0, 1.0, dt).end[0] - math.exp(-1)) for dt in (0.1, 0.05, 0.025)]
    assert 14 < errs[0] / errs[1] < 18
    assert 14 < errs[1] / errs[2] < 18


def test_ode_last_step_lands_on_t1():
    sol = an.ode_solve(lambda x: np.zeros_like(x), [1.0], 0.0, 0.35, 0.1)
    assert sol.t[-1] == 0.35


# -- tracking -----------------------------------------------------------------


def test_noise_free_tracking_improves_with_smaller_steps():
    f = LinearField(ROT, blocks=(1, 1))
    errs = []
    for a in (0.2, 0.05):
        sch = CustomSchedule(lambda n, a=a: a, validate=False)
        h = run(SimConfig(f, sch, int(4 / a), [2.0, -1.0]))
        rp = an.build_rescaled(h, TimeAxis(sch, T=1.0), f)
        errs.append(max(r.error for r in an.tracking_errors(rp, dt=a / 4)))
    # Euler local error is O(a): shrinking a by 4 cuts the error by about 4
    assert errs[1] < errs[0] / 3


def test_tracking_trend_rules():
    rep = an.tracking_trend([1.0, 0.5, 0.4, 0.45, 0.3, 0.2, 0.23, 0.1, 0.05], burn_in=2, slack=0.2, tol=0.1)
    assert rep.violations == []
    assert rep.passed
    bad = an.tracking_trend([1.0, 0.5, 0.4, 0.6, 0.05], burn_in=1, slack=0.2)
    assert bad.violations == [3]
    assert not bad.passed


def test_tracking_needs_field():
    h = run(SimConfig(LinearField(ROT), StepSchedule(), 50, [1.0, 1.0]))
    rp = an.build_rescaled(h, TimeAxis(StepSchedule()))
    with pytest.raises(ParameterError):
        an.tracking_error(rp, 0)


# -- Gronwall-type lemma ------------------------------------------------------


def _naive_threshold(inst):
    H = inst.horizon
    W = [sum(inst.a[k - 1] for k in range(max(1, n - int(inst.delta[n - 1])), n)) for n in range(1, H + 1)]
    t = [0.0, 0.0] + [sum(inst.a[: n - 1]) for n in range(2, H + 1)]
    for N in range(0, H + 1):
        if all(inst.C * W[n - 1] <= 1 - math.exp(-inst.C * t[N]) for n in range(max(N, 1), H + 1)):
            return N
    return None


@pytest.mark.parametrize("seed", range(6))
def test_threshold_matches_naive_scan(seed):
    inst = an.gronwall_equality_instance(np.random.default_rng(seed), 150)
    assert an.gronwall_threshold(inst).N == _naive_threshold(inst)


def test_threshold_regression():
    got = [an.gronwall_threshold(an.gronwall_equality_instance(np.random.default_rng(s), 300)).N for s in range(4)]
    assert got == [11, 9, 4, 20]


def test_windows_clamp_at_one():
    a = np.array([1.0, 0.5, 0.25, 0.125])
    assert an.gronwall_windows(a, [0, 5, 1, 2]).tolist() == [0.0, 1.0, 0.5, 0.75]


def test_hypothesis_violation_detected():
    inst = an.gronwall_equality_instance(np.random.default_rng(0), 100)
    y = inst.y.copy()
    y[40] *= 1.01
    bad = an.GronwallInstance(y, inst.a, inst.b, inst.c, inst.delta, inst.C)
    v = an.gronwall_bound_check(bad)
    assert v.status == "hypothesis-violated" and v.first_violation == 41


def test_threshold_not_found():
    # windows never shrink under a constant stepsize with a growing delay
    H = 50
    inst = an.GronwallInstance(np.zeros(H), np.ones(H), np.zeros(H), np.ones(H), np.arange(H), C=2.0)
    assert an.gronwall_bound_check(inst).status == "threshold-not-found"


def test_instance_validation():
    with pytest.raises(ParameterError):
        an.GronwallInstance([1.0], [1.0], [1.0], [1.0], [0], C=0.0)
    with pytest.raises(ParameterError):
        an.GronwallInstance([1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [2.0, 1.0], [0, 0], C=1.0)
    with pytest.raises(ParameterError):
        an.GronwallInstance([1.0], [1.0], [2.0], [1.0], [0], C=1.0, B=1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(20, 400), st.sampled_from(["harmonic", "power"]))
def test_gronwall_conclusion_holds(seed, H, regime):
    rng = np.random.default_rng(seed)
    a = StepSchedule.for_moment(0.9 if regime == "harmonic" else 1.6).steps(np.arange(1, H + 1))
    v = an.gronwall_bound_check(an.gronwall_equality_instance(rng, H, a=a))
    assert v.status in ("pass", "threshold-not-found")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 300))
def test_classical_gronwall_holds(seed, K):
    x, a, C, L = an.classical_equality_instance(np.random.default_rng(seed), K)
    assert an.classical_gronwall_check(x, a, C, L).passed


def test_classical_rejects_bad_start():
    # x_0 above C breaks the hypothesis at index 0
    assert an.classical_gronwall_check([2.0, 1.0], [0.5], C=1.0, L=1.0).status == "hypothesis-violated"
    x, a, C, L = an.classical_equality_instance(np.random.default_rng(1), 20)
    assert an.classical_gronwall_check(x, a, C, L * 0.5).status == "hypothesis-violated"


# -- lemma verifiers ----------------------------------------------------------


def test_decade_maxima():
    v = np.arange(1, 101, dtype=float)
    ks, mx = an.decade_maxima(v)
    # n = 100 joins decade [10, 100)
    assert ks.tolist() == [0, 1]
    assert mx.tolist() == [9.0, 100.0]


def test_window_verifier_zero_delay():
    rep = an.verify_lemma_window(np.zeros(5000, dtype=int), StepSchedule(), burn_in=10)
    assert rep.passed and rep.final_max == 0.0


def test_window_verifier_detects_growth():
    # tau(n) = n - 1 gives window sum t(n), which grows
    rep = an.verify_lemma_window(np.arange(5000), StepSchedule(), burn_in=10)
    assert not rep.non_increasing


def test_aoi_lemma_report():
    trs = [trace(AoiModel.bernoulli(0.5), 20_000, s) for s in range(5)]
    rep = an.verify_lemma_aoi(trs, p=1.0, eps=0.05, limit=1000)
    assert rep.n_pass == 5 and rep.passed
    assert not an.verify_lemma_aoi([trace(AoiModel.scripted(range(50)), 50)], 1.0, 0.5).passed


def test_tail_oscillation():
    z = np.array([[0.0, 0.0], [1.0, 0.0], [4.0, 3.0], [2.0, 1.0]])
    assert an.tail_oscillation(z, 3) == math.hypot(2.0, 2.0)


def test_noise_probe_shrinks_with_start():
    f = AffineField(ROT, [0.2, 0.0], blocks=(1, 1))
    h = run(SimConfig(f, StepSchedule(), 20_000, [1.0, 1.0], noise=NoiseModel("bounded-uniform", 0.5), seed=0))
    rp = an.build_rescaled(h, TimeAxis(StepSchedule(), horizon=20_000), f)
    early, late = an.noise_convergence_probe(rp, 10), an.noise_convergence_probe(rp, 10_000)
    assert late.oscillation < early.oscillation
    assert late.passed


def test_entry_probe_stable_field():
    pr = an.entry_time_probe(LinearField(ROT), 1.0, np.random.default_rng(0), samples=4, t_max=3.0)
    # |phi(t)| = e^{-t}: enters radius 1/2 at ln 2
    assert pr.max_entry == pytest.approx(math.log(2), abs=0.011)


def test_empirical_envelope():
    f = LinearField(ROT, blocks=(1, 1))
    cfg = SimConfig(f, StepSchedule(), 200, [1.0, 1.0], delays=delay_matrix(2, AoiModel.bernoulli(0.3)))
    hs = [run(cfg), run(SimConfig(f, StepSchedule(), 200, [1.0, 1.0], delays=cfg.delays, seed=1))]
    env = an.empirical_envelope(hs, TimeAxis(StepSchedule()))
    assert np.all(env["envelope"] >= hs[0].tau.reshape(200, -1).max(axis=1))
