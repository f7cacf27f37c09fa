"""The distributed SA iteration with delayed reads, and its heavy-ball variant.

Agent ``i`` updates block ``i`` of the state using the other blocks as it last
saw them::

    x^i_{n+1} = x^i_n + a(n) [h^i(x^1_{n - tau_i1(n)}, ..., x^D_{n - tau_iD(n)}) + M^i_{n+1}]

Several seeds can run as one batch: the per-step work is vectorised across
replications, each with its own random streams.  Arithmetic is done with
elementwise sums (no BLAS), so a seed's trajectory does not depend on what it
was batched with.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .aoi import AoiModel, ParameterError, generate, pair_rng
from .dynamics import DimensionError, DriftField, NoiseModel, QuadraticObjective
from .schedule import CustomSchedule, StepSchedule, TimeAxis

__all__ = [
    "DIVERGENCE_NORM",
    "NOISE_STREAM",
    "SAMPLE_STREAM",
    "SimConfig",
    "SimHistory",
    "run",
    "run_batch",
    "replay",
    "delay_matrix",
    "read_indices",
    "momentum_tau",
    "momentum_split",
    "momentum_split_series",
    "step_plain",
    "step_heavy_ball",
]

DIVERGENCE_NORM = 1e12
NOISE_STREAM = 1
SAMPLE_STREAM = 2


def delay_matrix(D: int, default: AoiModel | None = None, diagonal: AoiModel | None = None, pairs=None):
    """``D x D`` table of models: ``default`` off the diagonal, ``diagonal`` (zero) on it, then ``pairs``.

    ``pairs`` maps ``(i, j)`` (1-based) to a model and overrides both.
    """
    default = default or AoiModel.zero()
    diagonal = diagonal or AoiModel.zero()
    table = [[diagonal if i == j else default for j in range(D)] for i in range(D)]
    for (i, j), m in (pairs or {}).items():
        if not (1 <= i <= D and 1 <= j <= D):
            raise DimensionError(f"delay pair ({i},{j}) outside 1..{D}")
        table[i - 1][j - 1] = m
    return table


@dataclass
class SimConfig:
    """Everything a run needs.  ``objective`` switches the drift to per-agent stochastic gradients."""

    field: DriftField
    schedule: StepSchedule | CustomSchedule
    horizon: int
    x1: np.ndarray
    delays: list | None = None  # D x D AoiModel table; None means zero delays
    noise: NoiseModel = NoiseModel()
    seed: int = 0
    variant: str = "plain"  # plain | heavy-ball
    beta: float = 0.0
    tau_rule: str = "log"  # momentum split window: log | time
    objective: QuadraticObjective | None = None
    history_cap: int | None = None

    def __post_init__(self):
        self.x1 = np.atleast_1d(np.asarray(self.x1, dtype=float))
        if self.horizon < 1:
            raise ParameterError("horizon N must be >= 1")
        if self.x1.shape != (self.field.dim,):
            raise DimensionError(f"x1 has shape {self.x1.shape}, field dimension is {self.field.dim}")
        if self.variant not in ("plain", "heavy-ball"):
            raise ParameterError(f"unknown variant {self.variant!r}")
        if not 0.0 <= self.beta < 1.0:
            raise ParameterError("beta must lie in [0, 1)")
        if self.variant == "plain" and self.beta != 0.0:
            raise ParameterError("beta is only meaningful for the heavy-ball variant")
        if self.tau_rule not in ("log", "time"):
            raise ParameterError("tau_rule must be 'log' or 'time'")
        D = self.field.D
        if self.delays is None:
            self.delays = delay_matrix(D)
        if len(self.delays) != D or any(len(row) != D for row in self.delays):
            raise DimensionError(f"delay table must be {D} x {D}")
        if self.objective is not None:
            if self.objective.dim != self.field.dim or tuple(self.objective.blocks) != self.field.blocks:
                raise DimensionError("objective and drift field disagree on blocks")
        if self.history_cap is not None and self.history_cap < 0:
            raise ParameterError("history_cap must be non-negative")

    @property
    def D(self) -> int:
        return self.field.D

    @property
    def dim(self) -> int:
        return self.field.dim


@dataclass
class SimHistory:
    """One run.  Row ``n-1`` of every per-step array refers to iteration ``n``.

    ``M[n-1]`` is ``M_{n+1}``, the noise entering the update at ``n``.
    ``e``, ``M`` (and ``m``, ``g`` for heavy-ball) cover every evaluated step,
    including ``n = N`` whose update is not applied.
    """

    x: np.ndarray  # (n_done, d)
    tau: np.ndarray  # (n_eval, D, D)
    e: np.ndarray  # (n_eval, d)
    M: np.ndarray  # (n_eval, d)
    steps: np.ndarray  # (n_eval,)
    seed: int
    verdict: str = "completed"  # completed | diverged | aborted
    stopped_at: int | None = None
    blocks: tuple[int, ...] = ()
    m: np.ndarray | None = None
    g: np.ndarray | None = None
    beta: float | None = None
    tau_rule: str = "log"

    @property
    def N(self) -> int:
        return len(self.x)

    @property
    def completed(self) -> bool:
        return self.verdict == "completed"

    def block(self, i: int) -> np.ndarray:
        """Trajectory of block ``i`` (1-based)."""
        s = np.cumsum((0,) + self.blocks)
        return self.x[:, s[i - 1] : s[i]]

    def read_indices(self) -> np.ndarray:
        return read_indices(self.tau)

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.x, axis=1)))


def read_indices(tau: np.ndarray) -> np.ndarray:
    """``max(1, n - tau_ij(n))`` for an ``(N, D, D)`` or ``(N,)`` array of delays."""
    tau = np.asarray(tau)
    n = np.arange(1, len(tau) + 1).reshape((-1,) + (1,) * (tau.ndim - 1))
    return np.maximum(1, n - tau)


# --------------------------------------------------------------------------
# single steps (reference implementations, also used by tests)


def _delayed_args(x_hist: np.ndarray, n: int, tau_n: np.ndarray, blocks) -> np.ndarray:
    """``(D, d)``: row ``i`` is agent ``i``'s view of the state at step ``n``."""
    s = np.cumsum((0,) + tuple(blocks))
    D = len(blocks)
    Z = np.empty((D, s[-1]))
    for i in range(D):
        for j in range(D):
            r = max(1, n - int(tau_n[i, j]))
            Z[i, s[j] : s[j + 1]] = x_hist[r - 1, s[j] : s[j + 1]]
    return Z


def step_plain(field: DriftField, x_hist: np.ndarray, n: int, a_n: float, tau_n, noise_n=None):
    """One update from the stored ``x_1..x_n``; returns ``(x_{n+1}, e_n)``."""
    tau_n = np.asarray(tau_n).reshape(field.D, field.D)
    Z = _delayed_args(x_hist, n, tau_n, field.blocks)
    H = field.eval_many(np.vstack([Z, x_hist[n - 1][None]]))
    hd = np.concatenate([H[i, sl] for i, sl in enumerate(field.slices)])
    M = np.zeros(field.dim) if noise_n is None else np.asarray(noise_n, dtype=float)
    return x_hist[n - 1] + a_n * (hd + M), hd - H[-1]


def step_heavy_ball(field: DriftField, x_hist, n, a_n, tau_n, m_prev, beta, noise_n=None):
    """Returns ``(x_{n+1}, m_n)`` with ``m_n = beta m_{n-1} + (1 - beta) g_n``."""
    tau_n = np.asarray(tau_n).reshape(field.D, field.D)
    Z = _delayed_args(x_hist, n, tau_n, field.blocks)
    H = field.eval_many(Z)
    g = np.concatenate([H[i, sl] for i, sl in enumerate(field.slices)])
    if noise_n is not None:
        g = g + noise_n
    m = beta * np.asarray(m_prev, dtype=float) + (1.0 - beta) * g
    return x_hist[n - 1] + a_n * m, m


# --------------------------------------------------------------------------
# batched run


def _draw_delays(cfg: SimConfig, seeds, N) -> np.ndarray:
    D = cfg.D
    tau = np.zeros((len(seeds), N, D, D), dtype=np.int32)
    for r, s in enumerate(seeds):
        for i in range(D):
            for j in range(D):
                model = cfg.delays[i][j]
                if model.kind == "zero":
                    continue
                tau[r, :, i, j] = generate(model, N, pair_rng(s, i + 1, j + 1, model.seed_offset))
    return tau


def _noise_stream(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), NOISE_STREAM, int(i)])


def _sample_stream(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), SAMPLE_STREAM, int(i)])


def _mat_rows(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    # X (..., d) times M^T without BLAS, so results are independent of batch shape
    return (X[..., None, :] * M).sum(axis=-1)


def run_batch(
    cfg: SimConfig,
    seeds: Sequence[int],
    tau: np.ndarray | None = None,
    noise: np.ndarray | None = None,
) -> list[SimHistory]:
    """Run ``cfg`` once per seed.  ``tau``/``noise`` replay recorded randomness.

    ``tau`` has shape ``(R, N, D, D)`` and ``noise`` ``(R, N, d)`` with
    ``noise[r, n-1] = M_{n+1}``.
    """
    seeds = [int(s) for s in seeds]
    R, N, D, d = len(seeds), int(cfg.horizon), cfg.D, cfg.dim
    fld = cfg.field
    blk = np.concatenate([np.full(b, i) for i, b in enumerate(fld.blocks)])
    coord = np.arange(d)
    steps = TimeAxis(cfg.schedule, horizon=N).steps(N).copy()

    if tau is None:
        tau = _draw_delays(cfg, seeds, N)
    else:
        tau = np.asarray(tau).reshape(R, N, D, D)
    if np.any(tau < 0):
        raise ParameterError("delays must be non-negative")
    tau = tau.astype(np.int32, copy=False)

    # abort (not clamp) when a read reaches further back than the cap allows
    stop_cap = np.full(R, N + 1)
    if cfg.history_cap is not None:
        back = np.minimum(tau, np.arange(N, dtype=np.int32)[None, :, None, None])  # n - read index
        too_old = (back > cfg.history_cap).any(axis=(2, 3))
        for r in range(R):
            hit = np.nonzero(too_old[r])[0]
            if len(hit):
                stop_cap[r] = hit[0] + 1
        del back, too_old

    base = a_idx = b_idx = None
    sgd = cfg.objective is not None
    if noise is not None:
        noise = np.asarray(noise, dtype=float).reshape(R, N, d)
    elif sgd:
        a_idx = np.empty((R, N, D), dtype=np.int64)
        b_idx = np.empty((R, N, D), dtype=np.int64)
        for r, s in enumerate(seeds):
            for i in range(D):
                a_idx[r, :, i], b_idx[r, :, i] = cfg.objective.draw(_sample_stream(s, i + 1), N)
        S = cfg.objective._S
        bsup = cfg.objective.b_support
    elif not cfg.noise.is_zero:
        base = np.empty((R, N, d))
        for r, s in enumerate(seeds):
            for i, sl in enumerate(fld.slices):
                base[r, :, sl] = cfg.noise.base_draws(_noise_stream(s, i + 1), (N, sl.stop - sl.start))

    heavy = cfg.variant == "heavy-ball"
    beta = cfg.beta
    x = np.zeros((R, N, d))
    x[:, 0] = cfg.x1
    E = np.zeros((R, N, d))
    Mrec = np.zeros((R, N, d))
    if heavy:
        mrec = np.zeros((R, N, d))
        grec = np.zeros((R, N, d))
        m = np.zeros((R, d))
    alive = np.ones(R, dtype=bool)
    stop = np.full(R, N)  # number of evaluated steps kept
    n_x = np.full(R, N)  # number of states kept
    verdict = ["completed"] * R
    stopped_at: list[int | None] = [None] * R
    ridx = np.arange(R)[:, None, None]
    lim2 = DIVERGENCE_NORM**2

    for n in range(1, N + 1):
        for r in np.nonzero(alive & (stop_cap == n))[0]:
            alive[r] = False
            verdict[r], stopped_at[r] = "aborted", n
            stop[r], n_x[r] = n - 1, n
        if not alive.any():
            break
        k = n - 1
        rows_k = np.maximum(0, k - tau[:, k])[:, :, blk]  # 0-based row read for coordinate c by agent i
        Z = x[ridx, rows_k, coord]  # (R, D, d)
        X = np.concatenate((Z, x[:, k][:, None]), axis=1)
        H = fld.eval_many(X.reshape(-1, d)).reshape(R, D + 1, d)
        hd = H[:, blk, coord]
        E[:, k] = hd - H[:, D]
        if noise is not None:
            Mk = noise[:, k]
        elif sgd:
            grad = _mat_rows(Z, S[a_idx[:, k]]) + bsup[b_idx[:, k]]  # (R, D, d)
            Mk = -grad[:, blk, coord] - hd
        elif base is not None:
            amp = cfg.noise.amplitude((Z * Z).sum(axis=-1))  # (R, D)
            Mk = amp[:, blk] * base[:, k]
        else:
            Mk = np.zeros((R, d))
        Mrec[:, k] = Mk
        if heavy:
            gk = hd + Mk
            m = beta * m + (1.0 - beta) * gk
            grec[:, k] = gk
            mrec[:, k] = m
            upd = m
        else:
            upd = hd + Mk
        if n == N:
            break
        xn = x[:, k] + steps[k] * upd
        sq = (xn * xn).sum(axis=1)
        bad = alive & ~(sq <= lim2)
        xn[~alive] = 0.0
        x[:, n] = xn
        for r in np.nonzero(bad)[0]:
            alive[r] = False
            verdict[r], stopped_at[r] = "diverged", n + 1
            stop[r], n_x[r] = n, n
            x[r, n] = 0.0

    out = []
    for r, s in enumerate(seeds):
        nx, ne = int(n_x[r]), int(stop[r])
        h = SimHistory(
            x=x[r, :nx],
            tau=tau[r, :ne],
            e=E[r, :ne],
            M=Mrec[r, :ne],
            steps=steps[:ne],
            seed=s,
            verdict=verdict[r],
            stopped_at=stopped_at[r],
            blocks=fld.blocks,
            tau_rule=cfg.tau_rule,
        )
        if heavy:
            h.m, h.g, h.beta = mrec[r, :ne], grec[r, :ne], beta
        out.append(h)
    return out


def run(cfg: SimConfig) -> SimHistory:
    """Run ``cfg`` with its own seed."""
    return run_batch(cfg, [cfg.seed])[0]


def replay(cfg: SimConfig, hist: SimHistory) -> SimHistory:
    """Re-run using the delays and noise recorded in ``hist``."""
    N = len(hist.tau)
    c = replace(cfg, horizon=N) if N != cfg.horizon else cfg
    return run_batch(c, [hist.seed], tau=hist.tau[None], noise=hist.M[None])[0]


# --------------------------------------------------------------------------
# heavy-ball split


def momentum_tau(n, rule: str = "log", schedule=None):
    """Window length: ``ceil(n / log(n+1))`` or, with ``rule='time'``, ``ceil(n / sum_{k<=n} a(k))``."""
    n_arr = np.asarray(n, dtype=float)
    if rule == "log":
        out = np.ceil(n_arr / np.log(n_arr + 1.0))
    elif rule == "time":
        if schedule is None:
            raise ParameterError("rule 'time' needs a schedule")
        nmax = int(np.max(n_arr))
        t = np.cumsum(TimeAxis(schedule, horizon=nmax).steps(nmax))
        out = np.ceil(n_arr / t[n_arr.astype(np.int64) - 1])
    else:
        raise ParameterError(f"unknown rule {rule!r}")
    out = out.astype(np.int64)
    return int(out) if np.ndim(n) == 0 else out


@dataclass
class MomentumSplit:
    window: np.ndarray
    delta: np.ndarray
    c: float
    tau: int
    beta: float

    def reconstruct(self) -> np.ndarray:
        """``window + (1 - beta) c(n) delta_n``, which equals ``m_n``."""
        return self.window + (1.0 - self.beta) * self.c * self.delta


def _c_of(beta: float, n: int, tau: int) -> float:
    lo = max(1, n - tau)
    return float(np.sum(beta ** (n - np.arange(lo, n + 1, dtype=float))))


def momentum_split(g, n: int, beta: float, tau: int | None = None) -> MomentumSplit:
    """Split ``m_n`` into the last ``tau(n)+1`` terms and the normalised older tail ``delta_n``.

    ``g`` is an ``(N, d)`` array (row ``i-1`` holds ``g_i``) or a heavy-ball :class:`SimHistory`.
    """
    if isinstance(g, SimHistory):
        if g.g is None:
            raise ParameterError("history has no momentum record")
        g = g.g
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    if not 1 <= n <= len(g):
        raise ParameterError(f"n={n} outside 1..{len(g)}")
    if tau is None:
        tau = momentum_tau(n)
    lo = max(1, n - tau)
    c = _c_of(beta, n, tau)
    i_w = np.arange(lo, n + 1)
    window = (1.0 - beta) * ((beta ** (n - i_w).astype(float))[:, None] * g[i_w - 1]).sum(axis=0)
    L = n - tau - 1
    if L >= 1:
        i_t = np.arange(1, L + 1)
        delta = ((beta ** (n - i_t).astype(float))[:, None] * g[i_t - 1]).sum(axis=0) / c
    else:
        delta = np.zeros(g.shape[1])
    return MomentumSplit(window, delta, c, int(tau), beta)


@dataclass
class MomentumSeries:
    tau: np.ndarray  # (N,)
    c: np.ndarray  # (N,)
    delta: np.ndarray  # (N, d)

    @property
    def delta_norm(self) -> np.ndarray:
        return np.linalg.norm(self.delta, axis=1)


def momentum_split_series(g, beta: float, tau: np.ndarray | None = None, rule: str = "log", schedule=None) -> MomentumSeries:
    """``c(n)`` and ``delta_n`` for every ``n`` in O(N d).

    Uses ``P_L = beta P_{L-1} + g_L`` so that the tail is ``beta**(n-L) P_L``.
    """
    if isinstance(g, SimHistory):
        g = g.g
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    N, d = g.shape
    n = np.arange(1, N + 1)
    if tau is None:
        tau = momentum_tau(n, rule, schedule)
    tau = np.asarray(tau, dtype=np.int64)
    lo = np.maximum(1, n - tau)
    k = (n - lo + 1).astype(float)
    c = (1.0 - beta**k) / (1.0 - beta)
    P = np.zeros((N + 1, d))
    P[1:] = lfilter([1.0], [1.0, -beta], g, axis=0)
    L = n - tau - 1
    has = L >= 1
    delta = np.zeros((N, d))
    Lh = L[has]
    delta[has] = (beta ** (n[has] - Lh).astype(float))[:, None] * P[Lh] / c[has][:, None]
    return MomentumSeries(tau, c, delta)
