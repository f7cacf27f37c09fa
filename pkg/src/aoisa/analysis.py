"""Trajectory constructions, ODE tracking and inequality checkers.

Interpolation, segment-wise rescaling and accumulated noise are built from a
completed :class:`~aoisa.engine.SimHistory`.  Checkers return verdict objects;
they never raise on a failed check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .aoi import AoiModel, AoiTrace, ParameterError, fraction_exceedance, generate
from .dynamics import DriftField
from .engine import SimHistory
from .schedule import TimeAxis, window_sums

__all__ = [
    "IntegratorError",
    "InterpolatedPath",
    "RescaledPath",
    "build_rescaled",
    "OdeSolution",
    "ode_solve",
    "default_dt",
    "tracking_error",
    "tracking_errors",
    "tracking_trend",
    "GronwallInstance",
    "gronwall_windows",
    "gronwall_threshold",
    "gronwall_bound_check",
    "gronwall_equality_instance",
    "classical_gronwall_check",
    "classical_equality_instance",
    "verify_lemma_aoi",
    "verify_lemma_window",
    "decade_maxima",
    "noise_convergence_probe",
    "tail_oscillation",
    "empirical_envelope",
    "entry_time_probe",
]

REL_SLACK = 1e-9


class IntegratorError(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# interpolation and rescaling


class InterpolatedPath:
    """``xbar(t)``: linear interpolation through ``(t(n), x_n)``, ``n = 1..N``."""

    def __init__(self, axis: TimeAxis, x: np.ndarray):
        self.axis = axis
        self.x = np.asarray(x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.knots = axis.times(len(self.x)).copy()

    @property
    def span(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def __call__(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < self.knots[0]) or np.any(t_arr > self.knots[-1]):
            raise ParameterError("t outside the simulated time span")
        k = np.clip(np.searchsorted(self.knots, t_arr, side="right") - 1, 0, len(self.knots) - 1)
        out = self.x[k].copy()
        inner = (k < len(self.knots) - 1) & (t_arr > self.knots[k])
        if inner.any():
            ki = k[inner]
            w = ((t_arr[inner] - self.knots[ki]) / (self.knots[ki + 1] - self.knots[ki]))[:, None]
            out[inner] = self.x[ki] + w * (self.x[ki + 1] - self.x[ki])
        return out[0] if np.ndim(t) == 0 else out


@dataclass
class RescaledPath:
    """Segment-wise rescaling of a trajectory by the running maximum ``s(m)``.

    Per-index arrays are 0-based: entry ``n-1`` belongs to iteration ``n``.
    ``zeta[n-1]`` is ``sum_{k=1}^{n-1} a(k) Mhat_{k+1}``.
    """

    path: InterpolatedPath
    starts: np.ndarray  # n(m) for every segment start <= N
    s: np.ndarray  # s(m)
    seg: np.ndarray  # m(n), n = 1..N
    xhat: np.ndarray  # x_n / s(m(n))
    ehat: np.ndarray
    Mhat: np.ndarray
    zeta: np.ndarray
    steps: np.ndarray
    field_: DriftField | None = None

    @property
    def axis(self) -> TimeAxis:
        return self.path.axis

    @property
    def n_segments(self) -> int:
        return len(self.starts)

    def segment_times(self, m: int) -> tuple[float, float]:
        T0, T1, _, _ = self.axis.segment_bounds(m)
        return T0, T1

    def is_complete(self, m: int) -> bool:
        return self.axis.segment_start(m + 1) <= self.path.x.shape[0]

    def __call__(self, t, m: int | None = None) -> np.ndarray:
        """``xhat(t)``; pass ``m`` to take the left limit at ``T_{m+1}``."""
        if m is None:
            n = int(np.searchsorted(self.path.knots, float(t), side="right"))
            m = int(self.seg[max(n, 1) - 1])
        return self.path(t) / self.s[m]


def build_rescaled(hist: SimHistory, axis: TimeAxis, field_: DriftField | None = None) -> RescaledPath:
    x = hist.x
    N = len(x)
    path = InterpolatedPath(axis, x)
    starts = axis.segment_starts(N)
    norms = np.linalg.norm(x[starts - 1], axis=1)
    s = np.maximum(np.maximum.accumulate(norms), 1.0)
    seg = axis.segment_indices(N)
    sn = s[seg][:, None]
    xhat = x / sn
    ne = min(len(hist.e), N)
    ehat = hist.e[:ne] / sn[:ne]
    Mhat = hist.M[:ne] / sn[:ne]
    steps = axis.steps(N).copy()
    # zeta_n = sum_{k=1}^{n-1} a(k) Mhat_{k+1}; Mhat row k-1 holds Mhat_{k+1}
    inc = steps[: ne][:, None] * Mhat
    zeta = np.zeros((N, x.shape[1]))
    if N > 1:
        zeta[1:] = np.cumsum(inc[: N - 1], axis=0)
    return RescaledPath(path, starts, s, seg, xhat, ehat, Mhat, zeta, steps, field_)


# --------------------------------------------------------------------------
# ODE integration


@dataclass
class OdeSolution:
    t: np.ndarray
    x: np.ndarray

    def __call__(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.stack([np.interp(t_arr, self.t, self.x[:, k]) for k in range(self.x.shape[1])], axis=1)
        return out[0] if np.ndim(t) == 0 else out

    @property
    def end(self) -> np.ndarray:
        return self.x[-1]


def _as_rhs(f) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(f, DriftField):
        return f
    return lambda x: np.atleast_1d(np.asarray(f(x), dtype=float))


def ode_solve(f, x0, t0: float, t1: float, dt: float = 1e-2) -> OdeSolution:
    """Classical fixed-step RK4 for ``x' = f(x)`` on ``[t0, t1]``.

    The step is ``(t1 - t0) / ceil((t1 - t0) / dt)`` so the grid ends exactly at ``t1``.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if t1 < t0:
        raise ParameterError("need t1 >= t0")
    rhs = _as_rhs(f)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    k = max(1, math.ceil((t1 - t0) / dt - 1e-12)) if t1 > t0 else 0
    ts = np.linspace(t0, t1, k + 1)
    xs = np.empty((k + 1, x.size))
    xs[0] = x
    h = (t1 - t0) / k if k else 0.0
    for i in range(k):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegratorError(f"non-finite state at t={ts[i + 1]:.6g}")
        xs[i + 1] = x
    return OdeSolution(ts, xs)


def default_dt(axis: TimeAxis, n0: int, n1: int) -> float:
    """``min(1e-2, smallest a(n) in the segment) / 2``."""
    a = axis.steps(max(n1, n0))[n0 - 1 : max(n1, n0)]
    return min(1e-2, float(np.min(a))) / 2.0


# --------------------------------------------------------------------------
# tracking


@dataclass
class TrackingResult:
    m: int
    error: float
    T0: float
    T1: float
    complete: bool
    s: float


def tracking_error(rp: RescaledPath, m: int, dt: float | None = None, field_: DriftField | None = None) -> TrackingResult:
    """``sup_t |xhat(t) - x^m(t)|`` over the merged knot set of segment ``m``.

    ``x^m`` solves ``x' = h_{s(m)}(x)`` from ``xhat(T_m)``.  An incomplete last
    segment is tracked up to ``t(N)``.
    """
    fld = field_ or rp.field_
    if fld is None:
        raise ParameterError("tracking needs the drift field")
    N = rp.path.x.shape[0]
    if not 0 <= m < rp.n_segments:
        raise ParameterError(f"segment {m} outside 0..{rp.n_segments - 1}")
    n0 = int(rp.starts[m])
    n1_full = rp.axis.segment_start(m + 1)
    n1 = min(n1_full, N)
    T0 = rp.axis.t(n0)
    T1 = rp.axis.t(n1)
    sm = float(rp.s[m])
    if dt is None:
        dt = default_dt(rp.axis, n0, max(n1 - 1, n0))
    hc = fld.scaled(sm) if sm > 1 else fld
    x0 = rp.path.x[n0 - 1] / sm
    if T1 <= T0:
        return TrackingResult(m, 0.0, T0, T1, n1_full <= N, sm)
    sol = ode_solve(hc, x0, T0, T1, dt)
    tk = rp.path.knots[n0 - 1 : n1]
    grid = np.union1d(tk, sol.t)
    grid = grid[(grid >= T0) & (grid <= T1)]
    xs = rp.path(grid) / sm
    err = float(np.max(np.linalg.norm(xs - sol(grid), axis=1)))
    return TrackingResult(m, err, T0, T1, n1_full <= N, sm)


def tracking_errors(rp: RescaledPath, dt: float | None = None, field_: DriftField | None = None, complete_only=False):
    out = [tracking_error(rp, m, dt, field_) for m in range(rp.n_segments)]
    return [r for r in out if r.complete] if complete_only else out


@dataclass
class TrendReport:
    errors: np.ndarray
    burn_in: int
    slack: float
    violations: list[int]
    final_error: float
    tol: float

    @property
    def non_increasing(self) -> bool:
        return not self.violations

    @property
    def passed(self) -> bool:
        return self.non_increasing and self.final_error < self.tol


def tracking_trend(errors: Sequence[float], burn_in: int = 5, slack: float = 0.2, tol: float = 0.1) -> TrendReport:
    """Non-increase check ``e[m+1] <= (1 + slack) e[m]`` for ``m >= burn_in``."""
    e = np.asarray(errors, dtype=float)
    viol = [m + 1 for m in range(burn_in, len(e) - 1) if e[m + 1] > (1.0 + slack) * e[m]]
    return TrendReport(e, burn_in, slack, viol, float(e[-1]) if len(e) else math.nan, tol)


# --------------------------------------------------------------------------
# Gronwall-type inequalities


@dataclass
class GronwallInstance:
    """Sequences indexed from ``n = 1`` (entry ``n-1``).

    Hypothesis: ``y_n <= b_n c_n + C sum_{k=n-Delta_n}^{n-1} a_k y_k`` with the
    lower limit clamped at 1; ``t(N) = sum_{i=1}^{N-1} a_i``.
    """

    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    delta: np.ndarray
    C: float
    B: float | None = None

    def __post_init__(self):
        self.y, self.a, self.b, self.c = (np.asarray(v, dtype=float) for v in (self.y, self.a, self.b, self.c))
        self.delta = np.asarray(self.delta, dtype=np.int64)
        n = len(self.y)
        if any(len(v) != n for v in (self.a, self.b, self.c, self.delta)):
            raise ParameterError("sequences must have equal length")
        if not self.C > 0:
            raise ParameterError("C must be positive")
        for name in ("y", "a", "b", "c", "delta"):
            if np.any(getattr(self, name) < 0):
                raise ParameterError(f"{name} must be non-negative")
        if np.any(np.diff(self.c) < 0):
            raise ParameterError("c must be non-decreasing")
        if self.B is None:
            self.B = float(np.max(self.b)) if n else 0.0
        if n and self.B < np.max(self.b):
            raise ParameterError("B must bound b")

    @property
    def horizon(self) -> int:
        return len(self.y)

    def times(self) -> np.ndarray:
        """``t(0..horizon)``."""
        t = np.zeros(self.horizon + 1)
        t[2:] = np.cumsum(self.a[: self.horizon - 1])
        return t


def gronwall_windows(a: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """``W_n = sum_{k=max(1, n-Delta_n)}^{n-1} a_k``."""
    a = np.asarray(a, dtype=float)
    P = np.concatenate(([0.0], np.cumsum(a)))  # P[k] = a_1 + ... + a_k
    n = np.arange(1, len(a) + 1)
    lo = np.maximum(1, n - np.asarray(delta, dtype=np.int64))
    return np.where(lo < n, P[n - 1] - P[np.minimum(lo, n) - 1], 0.0)


def _window_weighted(a, y, delta) -> np.ndarray:
    P = np.concatenate(([0.0], np.cumsum(np.asarray(a) * np.asarray(y))))
    n = np.arange(1, len(a) + 1)
    lo = np.maximum(1, n - np.asarray(delta, dtype=np.int64))
    return np.where(lo < n, P[n - 1] - P[np.minimum(lo, n) - 1], 0.0)


@dataclass
class ThresholdResult:
    N: int | None

    @property
    def found(self) -> bool:
        return self.N is not None


def gronwall_threshold(inst: GronwallInstance) -> ThresholdResult:
    """Smallest ``N >= 0`` with ``C W_n <= 1 - exp(-C t(N))`` for every ``n >= N`` in the horizon."""
    H = inst.horizon
    if H == 0:
        return ThresholdResult(0)
    lhs = inst.C * gronwall_windows(inst.a, inst.delta)
    suffix = np.maximum.accumulate(lhs[::-1])[::-1]  # suffix[n-1] = max_{k >= n} lhs
    t = inst.times()
    for N in range(0, H + 1):
        need = suffix[max(N, 1) - 1] if N <= H else 0.0
        if need <= -math.expm1(-inst.C * t[N]):
            return ThresholdResult(N)
    return ThresholdResult(None)


@dataclass
class GronwallVerdict:
    status: str  # pass | bound-violated | hypothesis-violated | threshold-not-found
    N: int | None
    first_violation: int | None = None
    max_ratio: float = 0.0  # max y_n / bound_n over checked n
    corollary_ratio: np.ndarray | None = None  # y_n / c_n

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _le(lhs, rhs, slack=REL_SLACK):
    return lhs <= rhs + slack * np.maximum(np.abs(rhs), np.abs(lhs))


def gronwall_bound_check(inst: GronwallInstance, slack: float = REL_SLACK) -> GronwallVerdict:
    """Check the hypothesis, find ``N``, then verify the conclusion for ``n >= N``."""
    W = gronwall_windows(inst.a, inst.delta)
    hyp_rhs = inst.b * inst.c + inst.C * _window_weighted(inst.a, inst.y, inst.delta)
    ok = _le(inst.y, hyp_rhs, slack)
    if not ok.all():
        return GronwallVerdict("hypothesis-violated", None, int(np.argmin(ok)) + 1)
    thr = gronwall_threshold(inst)
    if not thr.found:
        return GronwallVerdict("threshold-not-found", None)
    N = thr.N
    t = inst.times()
    bound = inst.c * (inst.b + inst.B * inst.C * math.exp(inst.C * t[N]) * W)
    lo = max(N, 1) - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound[lo:] > 0, inst.y[lo:] / bound[lo:], np.where(inst.y[lo:] > 0, np.inf, 0.0))
        cor = np.where(inst.c > 0, inst.y / inst.c, 0.0)
    good = _le(inst.y[lo:], bound[lo:], slack)
    mr = float(np.max(ratio)) if len(ratio) else 0.0
    if not good.all():
        return GronwallVerdict("bound-violated", N, lo + int(np.argmin(good)) + 1, mr, cor)
    return GronwallVerdict("pass", N, None, mr, cor)


def gronwall_equality_instance(rng: np.random.Generator, horizon: int = 500, delta=None, a=None, C=None):
    """Random instance whose ``y`` satisfies the hypothesis with equality."""
    if a is None:
        a = 1.0 / np.arange(1, horizon + 1)
    if delta is None:
        delta = generate(AoiModel.bernoulli(float(rng.uniform(0.05, 0.5))), horizon, rng)
    if C is None:
        C = float(rng.uniform(0.1, 2.0))
    b = rng.uniform(0.0, 1.0, horizon)
    c = np.cumsum(rng.uniform(0.0, 0.5, horizon)) + rng.uniform(0.0, 1.0)
    y = np.zeros(horizon)
    Py = np.zeros(horizon + 1)  # Py[k] = sum_{i<=k} a_i y_i
    for n in range(1, horizon + 1):
        lo = max(1, n - int(delta[n - 1]))
        win = Py[n - 1] - Py[lo - 1] if lo < n else 0.0
        y[n - 1] = b[n - 1] * c[n - 1] + C * win
        Py[n] = Py[n - 1] + a[n - 1] * y[n - 1]
    return GronwallInstance(y, a, b, c, delta, C)


@dataclass
class ClassicalVerdict:
    status: str  # pass | bound-violated | hypothesis-violated
    first_violation: int | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def classical_gronwall_check(x, a, C: float, L: float, slack: float = REL_SLACK) -> ClassicalVerdict:
    """``x_{n+1} <= C + L sum_{m<=n} a_m x_m`` (and ``x_0 <= C``) implies ``x_{n+1} <= C exp(L sum_{m<=n} a_m)``.

    ``x`` holds ``x_0..x_K`` and ``a`` holds ``a_0..a_{K-1}``.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    if len(a) < len(x) - 1:
        raise ParameterError("need a_0..a_{K-1} for x_0..x_K")
    a = a[: len(x) - 1]
    if np.any(x < 0) or np.any(a < 0) or C < 0 or L < 0:
        raise ParameterError("inputs must be non-negative")
    acc = np.concatenate(([0.0], np.cumsum(a * x[:-1])))
    hyp = _le(x, C + L * acc, slack)
    if not hyp.all():
        return ClassicalVerdict("hypothesis-violated", int(np.argmin(hyp)))
    bound = C * np.exp(L * np.concatenate(([0.0], np.cumsum(a))))
    ok = _le(x, bound, slack)
    if not ok.all():
        return ClassicalVerdict("bound-violated", int(np.argmin(ok)))
    return ClassicalVerdict("pass")


def classical_equality_instance(rng: np.random.Generator, length: int = 500):
    """``x`` from the hypothesis taken with equality, with random ``a``, ``C``, ``L``."""
    a = rng.uniform(0.0, 1.0, length) / np.arange(1, length + 1)
    C = float(rng.uniform(0.1, 2.0))
    L = float(rng.uniform(0.1, 2.0))
    x = np.empty(length + 1)
    x[0] = C
    acc = 0.0
    for n in range(length):
        acc += a[n] * x[n]
        x[n + 1] = C + L * acc
    return x, a, C, L


# --------------------------------------------------------------------------
# lemma verifiers


@dataclass
class AoiLemmaReport:
    last_exceedance: list[int | None]
    limit: int
    required: int

    @property
    def n_pass(self) -> int:
        return sum(1 for v in self.last_exceedance if v is None or v < self.limit)

    @property
    def passed(self) -> bool:
        return self.n_pass >= self.required


def verify_lemma_aoi(traces, p: float, eps: float, limit: int | None = None, required: int | None = None) -> AoiLemmaReport:
    """``fraction_exceedance`` over several traces; a trace passes when its last exceedance is below ``limit``.

    ``limit`` defaults to the trace length and ``required`` to all traces.
    """
    traces = list(traces)
    last = [fraction_exceedance(tr, eps, p) for tr in traces]
    if limit is None:
        limit = min(len(tr) for tr in traces)
    return AoiLemmaReport(last, int(limit), len(traces) if required is None else int(required))


def _decade_of(n: np.ndarray, N: int) -> np.ndarray:
    digits = np.floor(np.log10(n)).astype(np.int64)
    # guard against log10 rounding at exact powers of ten
    digits += (10 ** (digits + 1) <= n).astype(np.int64)
    digits -= (10**digits > n).astype(np.int64)
    top = len(str(max(N - 1, 1))) - 1
    return np.minimum(digits, top)


def decade_maxima(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Max of ``values[n-1]`` over decades ``[10^k, 10^(k+1))``; ``n = N`` joins the previous decade."""
    v = np.asarray(values, dtype=float)
    N = len(v)
    dec = _decade_of(np.arange(1, N + 1), N)
    ks = np.unique(dec)
    return ks, np.array([v[dec == k].max() for k in ks])


@dataclass
class WindowReport:
    decades: np.ndarray
    maxima: np.ndarray
    burn_in: int
    tol: float

    @property
    def non_increasing(self) -> bool:
        sel = self.maxima[self.decades >= int(np.floor(np.log10(max(self.burn_in, 1)) + 1e-12))]
        return bool(np.all(np.diff(sel) <= 0))

    @property
    def final_max(self) -> float:
        return float(self.maxima[-1])

    @property
    def passed(self) -> bool:
        return self.non_increasing and self.final_max < self.tol


def verify_lemma_window(tau, schedule, burn_in: int = 1000, tol: float = 0.05) -> WindowReport:
    """Decade maxima of ``sum_{k=n-tau(n)}^{n-1} a(k)``.

    ``tau`` is an :class:`AoiTrace`, a 1-d path, or a history (max over pairs).
    Passes iff the maxima are non-increasing from the decade containing
    ``burn_in`` on and the last decade is below ``tol``.
    """
    if isinstance(tau, SimHistory):
        tau = tau.tau.reshape(len(tau.tau), -1).max(axis=1)
    elif isinstance(tau, AoiTrace):
        tau = tau.values
    tau = np.asarray(tau)
    axis = schedule if isinstance(schedule, TimeAxis) else TimeAxis(schedule, horizon=len(tau))
    ws = window_sums(axis, tau)
    ks, mx = decade_maxima(ws)
    return WindowReport(ks, mx, burn_in, tol)


# --------------------------------------------------------------------------
# accumulated noise


def tail_oscillation(zeta: np.ndarray, n0: int) -> float:
    """Euclidean norm of the coordinate ranges of ``zeta_n``, ``n >= n0``; bounds ``sup |zeta_n - zeta_m|``."""
    z = np.asarray(zeta, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    tail = z[n0 - 1 :]
    return float(np.linalg.norm(tail.max(axis=0) - tail.min(axis=0)))


@dataclass
class NoiseProbe:
    n0: int
    oscillation: float
    tol: float
    K_emp: float

    @property
    def passed(self) -> bool:
        return self.oscillation <= self.tol


def noise_convergence_probe(rp: RescaledPath, n0: int | None = None, tol: float | None = None, factor: float = 10.0) -> NoiseProbe:
    """Tail oscillation of the accumulated rescaled noise.

    Default tolerance ``factor * sqrt(sum_{n>=n0} a(n)^2) * K_emp`` with ``K_emp``
    the RMS of ``|Mhat|`` over the tail.
    """
    N = len(rp.zeta)
    if n0 is None:
        n0 = max(1, N // 2)
    osc = tail_oscillation(rp.zeta, n0)
    Mt = rp.Mhat[n0 - 1 :]
    K = float(np.sqrt(np.mean(np.sum(Mt * Mt, axis=1)))) if len(Mt) else 0.0
    if tol is None:
        tol = factor * float(np.sqrt(np.sum(rp.steps[n0 - 1 :] ** 2))) * K
    return NoiseProbe(n0, osc, tol, K)


# --------------------------------------------------------------------------
# diagnostics that are not the proof objects


def empirical_envelope(histories: Sequence[SimHistory], axis: TimeAxis) -> dict[str, np.ndarray]:
    """Across-replication max delay and its window sum.

    A sample-based stand-in only: the deterministic envelope in the analysis is a
    supremum over all outcomes and cannot be computed from finitely many runs.
    """
    N = min(len(h.tau) for h in histories)
    env = np.max([h.tau[:N].reshape(N, -1).max(axis=1) for h in histories], axis=0)
    return {"envelope": env, "window_sum": window_sums(axis, env)}


@dataclass
class EntryProbe:
    c: float
    entry_times: np.ndarray  # first grid time with |phi| < 1/2 (inf if never)

    @property
    def max_entry(self) -> float:
        return float(np.max(self.entry_times))


def entry_time_probe(fld: DriftField, c: float, rng: np.random.Generator, samples: int = 32, t_max: float = 20.0, dt: float = 1e-2) -> EntryProbe:
    """Integrate ``x' = h_c(x)`` from random unit-sphere points; report when each enters radius 1/2.

    Finite samples cannot certify the uniform statement over the unit ball.
    """
    hc = fld.scaled(c) if c > 1 else fld
    out = np.empty(samples)
    for k in range(samples):
        v = rng.standard_normal(fld.dim)
        v /= np.linalg.norm(v)
        sol = ode_solve(hc, v, 0.0, t_max, dt)
        inside = np.nonzero(np.linalg.norm(sol.x, axis=1) < 0.5)[0]
        out[k] = sol.t[inside[0]] if len(inside) else math.inf
    return EntryProbe(float(c), out)
