"""End-to-end experiments: delayed distributed SGD and heavy-ball SA.

Replications use seeds ``seed, seed+1, ...`` and run as batches through
:func:`aoisa.engine.run_batch`.  Reports are reduced in seed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aoi import AoiModel, ParameterError
from .dynamics import DriftField, NoiseModel, QuadraticObjective
from .engine import SimConfig, SimHistory, delay_matrix, momentum_split_series, run_batch
from .output import config_hash, csv_text, summary_text
from .schedule import CustomSchedule, StepSchedule, TimeAxis, window_sum

__all__ = [
    "SeedRow",
    "ExperimentReport",
    "SgdExperiment",
    "MomentumExperiment",
    "run_sgd_experiment",
    "run_momentum_experiment",
    "scalar_quadratic",
    "block_quadratic",
    "batched",
    "SEED_COLUMNS",
]

SEED_COLUMNS = ("seed", "verdict", "final_error", "max_norm", "final_window_sum", "max_delta_tail")
# states kept in memory per batch (R * N * d); beyond this replications are split
BATCH_BUDGET = 12_000_000


@dataclass
class SeedRow:
    seed: int
    verdict: str
    final_error: float
    max_norm: float
    final_window_sum: float
    max_delta_tail: float | None = None

    def values(self):
        return (self.seed, self.verdict, self.final_error, self.max_norm, self.final_window_sum, self.max_delta_tail)


@dataclass
class ExperimentReport:
    name: str
    config_hash: str
    rows: list[SeedRow]
    summary: dict
    checks: dict = field(default_factory=dict)  # name -> bool
    extra_rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def n_diverged(self) -> int:
        return sum(r.verdict == "diverged" for r in self.rows)

    def summary_text(self) -> str:
        items = {"experiment": self.name, "config_hash": self.config_hash}
        items.update(self.summary)
        for k, v in self.checks.items():
            items[f"check.{k}"] = "pass" if v else "fail"
        items["verdict"] = "pass" if self.passed else "fail"
        return summary_text(items)

    def csv_text(self) -> str:
        return csv_text(SEED_COLUMNS, (r.values() for r in self.rows))


def batched(seeds: Sequence[int], horizon: int, dim: int, budget: int | None = None):
    budget = BATCH_BUDGET if budget is None else budget
    size = max(1, budget // max(1, horizon * dim))
    for k in range(0, len(seeds), size):
        yield list(seeds[k : k + size])


def _final_window(hist: SimHistory, axis: TimeAxis) -> float:
    n = len(hist.tau)
    if n == 0:
        return 0.0
    tau = int(hist.tau[-1].max())
    return window_sum(axis, n, tau)


def scalar_quadratic() -> QuadraticObjective:
    """1-d objective with ``A in {0.5, 1.5}`` and ``b in {1, 3}`` equiprobable; minimiser ``-1``."""
    return QuadraticObjective(np.array([0.5, 1.5]), np.array([1.0, 3.0]))


def block_quadratic(D: int = 3, block: int = 2) -> QuadraticObjective:
    """Strongly convex quadratic over ``D`` agents with coupled blocks.

    Mean Hessian: tridiagonal with 2 on the diagonal and 0.5 beside it, so its
    eigenvalues lie in (1, 3) and neighbouring blocks interact.  ``E[A]`` also
    carries a skew part, and ``A``, ``b`` each take two values.
    """
    d = D * block
    H = 2.0 * np.eye(d) + 0.5 * (np.eye(d, k=1) + np.eye(d, k=-1))
    K = 0.2 * (np.eye(d, k=2) - np.eye(d, k=-2))
    EA = 0.5 * H + K
    P = 0.4 * np.diag(np.where(np.arange(d) % 2 == 0, 1.0, -1.0)) + 0.1 * np.eye(d, k=1)
    Eb = np.resize(np.array([1.0, -1.0, 0.5, 0.0, -0.5, 2.0]), d)
    u = np.full(d, 0.5)
    return QuadraticObjective(np.stack([EA + P, EA - P]), np.stack([Eb + u, Eb - u]), blocks=(block,) * D)


# --------------------------------------------------------------------------
# SGD


@dataclass
class SgdExperiment:
    objective: QuadraticObjective
    delays: list | AoiModel | None = None  # table, or one model for every off-diagonal pair
    p: float = 1.0  # declared moment order of the delays
    schedule: StepSchedule | CustomSchedule | None = None
    horizon: int = 100_000
    replications: int = 20
    seed: int = 0
    x1: np.ndarray | None = None
    error_tol: float = 1e-2
    bound_factor: float = 100.0

    def __post_init__(self):
        lam = self.objective.min_eigenvalue()
        if not lam > 0:
            raise ParameterError(f"E[A] + E[A]^T must be positive definite (min eigenvalue {lam:.3g})")
        if self.schedule is None:
            self.schedule = StepSchedule.for_moment(self.p)
        if isinstance(self.schedule, StepSchedule) and self.schedule.regime == "harmonic" and self.p > 1:
            raise ParameterError("harmonic schedule declared for p > 1; use the power regime")
        if isinstance(self.schedule, StepSchedule) and self.schedule.regime == "power" and self.p <= 1:
            raise ParameterError("power regime requires p > 1")
        D = len(self.objective.blocks)
        if isinstance(self.delays, AoiModel) or self.delays is None:
            self.delays = delay_matrix(D, self.delays)
        self.x1 = np.ones(self.objective.dim) if self.x1 is None else np.atleast_1d(np.asarray(self.x1, dtype=float))

    def describe(self) -> dict:
        o = self.objective
        return {
            "experiment": "sgd",
            "A_support": o.A_support, "b_support": o.b_support, "A_probs": o.A_probs, "b_probs": o.b_probs,
            "blocks": o.blocks, "delays": [[m.label for m in row] for row in self.delays], "p": self.p,
            "schedule": repr(self.schedule), "horizon": self.horizon, "replications": self.replications,
            "seed": self.seed, "x1": self.x1, "error_tol": self.error_tol, "bound_factor": self.bound_factor,
        }


def run_sgd_experiment(spec: SgdExperiment, histories: list | None = None) -> ExperimentReport:
    """Run every replication and reduce to per-seed rows plus stability/convergence checks.

    Pass a list as ``histories`` to collect the runs.
    """
    obj = spec.objective
    h = obj.drift()
    xs = obj.minimizer()
    resid = float(np.max(np.abs(h(xs))))
    if resid > 1e-10:
        raise ParameterError(f"minimiser residual {resid:.3g} exceeds 1e-10")
    cfg = SimConfig(h, spec.schedule, spec.horizon, spec.x1, delays=spec.delays, objective=obj, seed=spec.seed)
    axis = TimeAxis(spec.schedule, horizon=spec.horizon)
    bound = spec.bound_factor * (1.0 + np.linalg.norm(spec.x1) + np.linalg.norm(xs))
    seeds = [spec.seed + r for r in range(spec.replications)]
    rows = []
    for chunk in batched(seeds, spec.horizon, obj.dim):
        for hist in run_batch(cfg, chunk):
            rows.append(SeedRow(hist.seed, hist.verdict, float(np.linalg.norm(hist.final - xs)), hist.max_norm(), _final_window(hist, axis)))
            if histories is not None:
                histories.append(hist)
    errs = np.array([r.final_error for r in rows])
    norms = np.array([r.max_norm for r in rows])
    summary = {
        "replications": len(rows),
        "horizon": spec.horizon,
        "x_star": " ".join(format(v, ".17g") for v in xs),
        "min_hessian_eigenvalue": obj.min_eigenvalue(),
        "minimizer_residual": resid,
        "diverged": sum(r.verdict == "diverged" for r in rows),
        "median_final_error": float(np.median(errs)),
        "max_final_error": float(np.max(errs)),
        "max_norm": float(np.max(norms)),
        "norm_bound": bound,
        "error_tol": spec.error_tol,
    }
    checks = {
        "no_divergence": summary["diverged"] == 0,
        "bounded": bool(np.all(norms <= bound)),
        "median_error": summary["median_final_error"] < spec.error_tol,
    }
    return ExperimentReport("sgd", config_hash(spec.describe()), rows, summary, checks)


# --------------------------------------------------------------------------
# heavy-ball


@dataclass
class MomentumExperiment:
    """Heavy-ball runs and plain twins on shared seeds.

    Either ``objective`` (per-agent stochastic gradients) or ``field`` with ``noise``.
    """

    beta: float
    field: DriftField | None = None
    noise: NoiseModel = NoiseModel()
    objective: QuadraticObjective | None = None
    delays: list | AoiModel | None = None
    schedule: StepSchedule | CustomSchedule | None = None
    horizon: int = 100_000
    replications: int = 20
    seed: int = 0
    x1: np.ndarray | None = None
    n0: int = 1000
    gap_tol: float = 1e-2
    delta_tol: float | None = None
    tau_rule: str = "log"

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ParameterError("beta must lie in [0, 1)")
        if self.objective is not None:
            self.field = self.objective.drift()
        if self.field is None:
            raise ParameterError("need a drift field or an objective")
        if self.schedule is None:
            self.schedule = StepSchedule()
        if isinstance(self.schedule, StepSchedule) and self.schedule.regime != "harmonic":
            raise ParameterError("heavy-ball experiments need a(n) in O(1/n): use the harmonic regime")
        if isinstance(self.delays, AoiModel) or self.delays is None:
            self.delays = delay_matrix(self.field.D, self.delays)
        self.x1 = np.ones(self.field.dim) if self.x1 is None else np.atleast_1d(np.asarray(self.x1, dtype=float))

    def describe(self) -> dict:
        d = {
            "experiment": "momentum", "beta": self.beta, "noise": repr(self.noise),
            "delays": [[m.label for m in row] for row in self.delays], "schedule": repr(self.schedule),
            "horizon": self.horizon, "replications": self.replications, "seed": self.seed, "x1": self.x1,
            "n0": self.n0, "gap_tol": self.gap_tol, "delta_tol": self.delta_tol, "tau_rule": self.tau_rule,
        }
        if self.objective is not None:
            o = self.objective
            d.update(A_support=o.A_support, b_support=o.b_support, blocks=o.blocks)
        else:
            d["field"] = {k: v for k, v in vars(self.field).items() if isinstance(v, (np.ndarray, tuple, float, int))}
        return d


def run_momentum_experiment(spec: MomentumExperiment, histories: list | None = None) -> ExperimentReport:
    """Heavy-ball vs plain twins; reports the final-iterate gap and ``max_{n >= n0} |delta_n|``."""
    common = dict(delays=spec.delays, noise=spec.noise, objective=spec.objective, seed=spec.seed, tau_rule=spec.tau_rule)
    hb_cfg = SimConfig(spec.field, spec.schedule, spec.horizon, spec.x1, variant="heavy-ball", beta=spec.beta, **common)
    pl_cfg = SimConfig(spec.field, spec.schedule, spec.horizon, spec.x1, **common)
    axis = TimeAxis(spec.schedule, horizon=spec.horizon)
    target = spec.objective.minimizer() if spec.objective is not None else None
    seeds = [spec.seed + r for r in range(spec.replications)]
    rows, gaps, twin_rows = [], [], []
    for chunk in batched(seeds, spec.horizon, 3 * spec.field.dim):
        hb = run_batch(hb_cfg, chunk)
        pl = run_batch(pl_cfg, chunk)
        for a, b in zip(hb, pl):
            ser = momentum_split_series(a.g, spec.beta, rule=spec.tau_rule, schedule=spec.schedule)
            tail = ser.delta_norm[spec.n0 - 1 :]
            dmax = float(np.max(tail)) if len(tail) else 0.0
            both = a.completed and b.completed
            gap = float(np.linalg.norm(a.final - b.final)) if both else math.inf
            err = float(np.linalg.norm(a.final - target)) if target is not None else float(np.linalg.norm(a.final))
            rows.append(SeedRow(a.seed, a.verdict, err, a.max_norm(), _final_window(a, axis), dmax))
            twin_rows.append((a.seed, b.verdict, gap))
            gaps.append(gap)
            if histories is not None:
                histories.append((a, b))
    gaps = np.array(gaps)
    summary = {
        "replications": len(rows),
        "horizon": spec.horizon,
        "beta": spec.beta,
        "diverged": sum(r.verdict == "diverged" for r in rows) + sum(v == "diverged" for _, v, _ in twin_rows),
        "max_twin_gap": float(np.max(gaps)),
        "median_twin_gap": float(np.median(gaps)),
        "max_delta_tail": max(r.max_delta_tail for r in rows),
        "n0": spec.n0,
        "gap_tol": spec.gap_tol,
    }
    checks = {"no_divergence": summary["diverged"] == 0, "twin_gap": bool(np.all(gaps <= spec.gap_tol))}
    if spec.delta_tol is not None:
        checks["delta_tail"] = summary["max_delta_tail"] < spec.delta_tol
    return ExperimentReport("momentum", config_hash(spec.describe()), rows, summary, checks, twin_rows)
