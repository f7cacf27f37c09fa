from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoisa.aoi import ParameterError
from aoisa.schedule import CustomSchedule, StepSchedule, TimeAxis, choose_q, stepsize, window_sum, window_sums


def test_choose_q():
    assert choose_q(1.5) == 1.25
    assert choose_q(3.0) == 1.5
    with pytest.raises(ParameterError):
        choose_q(1.0)


def test_for_moment_picks_regime():
    assert StepSchedule.for_moment(0.7).regime == "harmonic"
    s = StepSchedule.for_moment(1.5)
    assert s.regime == "power" and s.q == 1.25
    assert stepsize(s, 16) == pytest.approx(16 ** -0.8)


def test_regime_mismatch_rejected():
    with pytest.raises(ParameterError):
        StepSchedule("harmonic", p_assumed=1.5)
    with pytest.raises(ParameterError):
        StepSchedule("power", p_assumed=0.8)
    with pytest.raises(ParameterError):
        StepSchedule("power", q=1.9, p_assumed=1.5)
    with pytest.raises(ParameterError):
        StepSchedule(a=0.0)


def test_stepsize_index_check():
    with pytest.raises(ParameterError):
        stepsize(StepSchedule(), 0)


def test_custom_schedule_validation():
    ok = CustomSchedule(lambda n: 1.5 / n, StepSchedule())
    assert ok(4) == 0.375
    with pytest.raises(ParameterError, match="twice"):
        CustomSchedule(lambda n: 3.0 / n, StepSchedule())
    with pytest.raises(ParameterError):
        CustomSchedule(lambda n: 1.0 / n)


def test_harmonic_times_match_fraction_oracle():
    ax = TimeAxis(StepSchedule(), horizon=50)
    exact = Fraction(0)
    assert ax.t(0) == 0.0 and ax.t(1) == 0.0
    for n in range(2, 300):
        exact += Fraction(1, n - 1)
        assert ax.t(n) == pytest.approx(float(exact), rel=1e-13)


def test_segment_starts_harmonic():
    # t(2) = 1, t(5) = 2.083, t(13) = 3.103: first n with t(n) >= T_m + 1
    ax = TimeAxis(StepSchedule(), T=1.0)
    assert ax.segment_starts(13).tolist() == [1, 2, 5, 13]
    assert ax.segment_bounds(1) == (1.0, pytest.approx(2 + 1 / 12), 2, 5)
    assert ax.segment_index(4) == 1 and ax.segment_index(5) == 2


def test_segment_starts_constant_step():
    ax = TimeAxis(CustomSchedule(lambda n: 1.0, validate=False), T=2.0)
    assert ax.segment_starts(8).tolist() == [1, 3, 5, 7]
    assert ax.segment_indices(8).tolist() == [0, 0, 1, 1, 2, 2, 3, 3]


def test_time_axis_grows_lazily():
    ax = TimeAxis(StepSchedule(), horizon=4)
    assert ax.a(10_000) == 1e-4
    assert len(ax.times(20_000)) == 20_000


def test_window_sum_values():
    ax = TimeAxis(StepSchedule())
    # sum_{k=3}^{4} 1/k
    assert window_sum(ax, 5, 2) == pytest.approx(1 / 3 + 1 / 4)
    assert window_sum(ax, 5, 0) == 0.0
    # lower limit clamps at 1
    assert window_sum(ax, 3, 10) == pytest.approx(1.5)
    with pytest.raises(ParameterError):
        window_sum(ax, 0, 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=200))
def test_window_sums_vectorised_matches_scalar(tau):
    ax = TimeAxis(StepSchedule.for_moment(1.8))
    got = window_sums(ax, np.array(tau))
    want = [window_sum(ax, n, t) for n, t in enumerate(tau, start=1)]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 5.0), st.floats(0.1, 3.0), st.integers(2, 3000))
def test_segment_properties(a, T, n):
    ax = TimeAxis(StepSchedule(a=a), T=T)
    m = ax.segment_index(n)
    Tm, Tm1, n0, n1 = ax.segment_bounds(m)
    assert n0 <= n < n1
    assert Tm <= ax.t(n) < Tm1
    # n(m+1) is the first index reaching T_m + T
    assert ax.t(n1) >= Tm + T
    assert n1 - 1 == n0 or ax.t(n1 - 1) < Tm + T


@settings(max_examples=40, deadline=None)
@given(st.floats(1.01, 4.0), st.integers(1, 10_000))
def test_power_steps_decrease_and_sum(p, n):
    s = StepSchedule.for_moment(p)
    a = s.steps(np.arange(1, n + 2))
    assert np.all(np.diff(a) < 0)
    assert 1.0 < s.q < min(2.0, p)
