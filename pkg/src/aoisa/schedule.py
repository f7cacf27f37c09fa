"""Stepsize schedules, the induced time axis and stepsize/AoI window sums."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .aoi import ParameterError

__all__ = [
    "StepSchedule",
    "CustomSchedule",
    "TimeAxis",
    "choose_q",
    "stepsize",
    "time_instant",
    "window_sum",
    "window_sums",
]


def choose_q(p: float) -> float:
    """Midpoint of ``(1, min(2, p))``."""
    if not p > 1:
        raise ParameterError("power regime needs p > 1; use the harmonic regime for p <= 1")
    return (1.0 + min(2.0, p)) / 2.0


@dataclass(frozen=True)
class StepSchedule:
    """``a(n) = a/n`` (harmonic, p <= 1) or ``a(n) = a*n**(-1/q)`` (power, 1 < q < min(2, p))."""

    regime: str = "harmonic"
    a: float = 1.0
    q: float | None = None
    p_assumed: float = 1.0

    def __post_init__(self):
        if self.regime not in ("harmonic", "power"):
            raise ParameterError(f"unknown regime {self.regime!r}")
        if not self.a > 0:
            raise ParameterError("scale a must be positive")
        if not self.p_assumed > 0:
            raise ParameterError("p_assumed must be positive")
        if self.regime == "harmonic":
            if self.p_assumed > 1:
                raise ParameterError(
                    f"harmonic regime is for p in (0, 1]; p={self.p_assumed} calls for the power regime"
                )
        else:
            if self.p_assumed <= 1:
                raise ParameterError(f"power regime requires p > 1, got p={self.p_assumed}")
            if self.q is None:
                object.__setattr__(self, "q", choose_q(self.p_assumed))
            if not 1.0 < self.q < min(2.0, self.p_assumed):
                raise ParameterError(f"power regime requires 1 < q < min(2, p); got q={self.q}, p={self.p_assumed}")

    @classmethod
    def for_moment(cls, p: float, a: float = 1.0) -> "StepSchedule":
        """The schedule matched to moment order ``p``."""
        if p <= 1:
            return cls("harmonic", a, None, p)
        return cls("power", a, choose_q(p), p)

    def __call__(self, n: int) -> float:
        return stepsize(self, n)

    def steps(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.regime == "harmonic":
            return self.a / n
        return self.a * n ** (-1.0 / self.q)

    @property
    def reference(self) -> Callable[[np.ndarray], np.ndarray]:
        return self.steps


class CustomSchedule:
    """User stepsize tagged with the asymptotic class it must not exceed.

    ``validate=True`` checks ``a(n) <= 2 * reference(n)`` for ``n <= 10**4``.
    """

    def __init__(self, fn: Callable[[int], float], reference: StepSchedule | None = None, validate: bool = True):
        self.fn = fn
        self.reference = reference
        if validate:
            if reference is None:
                raise ParameterError("validation needs a reference schedule")
            n = np.arange(1, 10_001)
            vals = self.steps(n)
            if np.any(vals <= 0):
                raise ParameterError("stepsizes must be positive")
            bad = np.nonzero(vals > 2.0 * reference.steps(n))[0]
            if len(bad):
                raise ParameterError(f"a(n) exceeds twice the {reference.regime} reference at n={bad[0] + 1}")

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ParameterError("n must be >= 1")
        return float(self.fn(int(n)))

    def steps(self, n: np.ndarray) -> np.ndarray:
        return np.array([self.fn(int(k)) for k in np.asarray(n).ravel()], dtype=float).reshape(np.shape(n))


def stepsize(schedule, n: int) -> float:
    if n < 1:
        raise ParameterError("n must be >= 1")
    if isinstance(schedule, StepSchedule):
        if schedule.regime == "harmonic":
            return schedule.a / n
        return schedule.a * n ** (-1.0 / schedule.q)
    return schedule(n)


class TimeAxis:
    """Prefix sums ``t(n)`` and segment boundaries ``T_m = t(n(m))`` for segment length ``T``.

    The cache only grows; extension is serialised by a lock.
    """

    def __init__(self, schedule, T: float = 1.0, horizon: int = 1024):
        if not T > 0:
            raise ParameterError("segment length T must be positive")
        self.schedule = schedule
        self.T = float(T)
        self._lock = threading.Lock()
        # _t[k] = t(k+1) = sum_{i=1}^{k} a(i); t(0) = t(1) = 0
        self._a = np.empty(0)
        self._t = np.zeros(1)
        self._starts = [1]  # n(0) = 1
        self._ensure(max(int(horizon), 2))

    # -- cache ---------------------------------------------------------------

    def _ensure(self, n: int) -> None:
        """Make ``a(1..n)`` and ``t(1..n+1)`` available."""
        if n <= len(self._a):
            return
        with self._lock:
            have = len(self._a)
            if n <= have:
                return
            new = max(n, 2 * have)
            a_new = np.asarray(self.schedule.steps(np.arange(have + 1, new + 1)), dtype=float)
            t_new = self._t[-1] + np.cumsum(a_new)
            self._a = np.concatenate((self._a, a_new))
            self._t = np.concatenate((self._t, t_new))

    def steps(self, n_max: int) -> np.ndarray:
        """``a(1..n_max)`` as an array (index ``k-1`` holds ``a(k)``)."""
        self._ensure(n_max)
        return self._a[:n_max]

    def times(self, n_max: int) -> np.ndarray:
        """``t(1..n_max)`` (index ``n-1`` holds ``t(n)``)."""
        self._ensure(n_max)
        return self._t[:n_max]

    def a(self, n: int) -> float:
        if n < 1:
            raise ParameterError("n must be >= 1")
        self._ensure(n)
        return float(self._a[n - 1])

    def t(self, n: int) -> float:
        if n < 0:
            raise ParameterError("n must be >= 0")
        if n <= 1:
            return 0.0
        self._ensure(n)
        return float(self._t[n - 1])

    # -- segments ------------------------------------------------------------

    def _extend_segments(self, upto_m: int | None = None, upto_n: int | None = None) -> None:
        with self._lock:
            starts = self._starts
        while True:
            m = len(starts) - 1
            if upto_m is not None and m >= upto_m + 1:
                return
            if upto_n is not None and starts[-1] > upto_n:
                return
            target = self.t(starts[-1]) + self.T
            # smallest n with t(n) >= target
            n = starts[-1] + 1
            while True:
                self._ensure(2 * n)
                idx = int(np.searchsorted(self._t, target, side="left"))
                if idx < len(self._t) - 1:
                    n = max(idx + 1, starts[-1] + 1)
                    break
                n = 2 * n
            with self._lock:
                if len(starts) - 1 == m:
                    starts.append(n)

    def segment_start(self, m: int) -> int:
        """``n(m)``."""
        if m < 0:
            raise ParameterError("m must be >= 0")
        self._extend_segments(upto_m=m)
        return self._starts[m]

    def segment_index(self, n: int) -> int:
        """``m(n)``: the largest ``m`` with ``T_m <= t(n)``."""
        if n < 0:
            raise ParameterError("n must be >= 0")
        n = max(n, 1)
        self._extend_segments(upto_n=n)
        return int(np.searchsorted(self._starts, n, side="right")) - 1

    def segment_bounds(self, m: int) -> tuple[float, float, int, int]:
        """``(T_m, T_{m+1}, n(m), n(m+1))``."""
        n0 = self.segment_start(m)
        n1 = self.segment_start(m + 1)
        return self.t(n0), self.t(n1), n0, n1

    def segment_starts(self, horizon: int) -> np.ndarray:
        """All ``n(m) <= horizon``."""
        self._extend_segments(upto_n=horizon)
        s = np.asarray(self._starts, dtype=np.int64)
        return s[s <= horizon]

    def segment_indices(self, horizon: int) -> np.ndarray:
        """``m(n)`` for ``n = 1..horizon``."""
        starts = self.segment_starts(horizon)
        return np.searchsorted(starts, np.arange(1, horizon + 1), side="right") - 1

    # -- window sums ---------------------------------------------------------

    def window_sum(self, n: int, tau: int) -> float:
        return window_sum(self, n, tau)

    def window_sums(self, tau: np.ndarray) -> np.ndarray:
        return window_sums(self, tau)


def time_instant(axis: TimeAxis, n: int) -> float:
    return axis.t(n)


def window_sum(axis: TimeAxis, n: int, tau: int) -> float:
    """``sum_{k=n-tau}^{n-1} a(k)`` with the lower limit clamped at 1."""
    if n < 1 or tau < 0:
        raise ParameterError("need n >= 1 and tau >= 0")
    lo = max(1, n - int(tau))
    if lo >= n:
        return 0.0
    return axis.t(n) - axis.t(lo)


def window_sums(axis: TimeAxis, tau: np.ndarray) -> np.ndarray:
    """Vectorised window sums for a path ``tau(1..N)``."""
    tau = np.asarray(tau, dtype=np.int64)
    N = len(tau)
    t = axis.times(N)
    n = np.arange(1, N + 1)
    lo = np.maximum(1, n - tau)
    return t[n - 1] - t[lo - 1]
