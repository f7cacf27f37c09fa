"""Command-line entry point.

Exit codes: 0 success, 2 usage, 3 missing config file, 4 schema error,
5 cross-field inconsistency, 6 divergence verdict, 7 verifier failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from .aoi import AoiModel, ParameterError, parse_model, trace
from .apps import MomentumExperiment, SgdExperiment, batched, run_momentum_experiment, run_sgd_experiment
from .config import ANALYSIS_DEFAULTS, ConfigError, ConfigFileMissing, CrossFieldError, ExperimentConfig, parse_config
from .dynamics import AffineField, LinearField
from .engine import SimHistory, momentum_split_series, run_batch
from .output import atomic_write, config_hash, csv_text, history_csv, summary_text
from .schedule import StepSchedule, TimeAxis, window_sum

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_SCHEMA = 4
EXIT_CROSS = 5
EXIT_DIVERGED = 6
EXIT_VERIFIER = 7


class _Outputs:
    """Funnels every file through one atomic writer and respects ``--format``."""

    def __init__(self, out_dir: str, fmt: str):
        self.dir = Path(out_dir)
        self.fmt = fmt
        self.written: list[Path] = []

    def csv(self, name: str, text: str):
        if self.fmt in ("csv", "both"):
            self.written.append(atomic_write(self.dir / name, text))

    def summary(self, name: str, items: dict):
        if self.fmt in ("summary", "both"):
            self.written.append(atomic_write(self.dir / name, summary_text(items)))


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="experiment config file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--horizon", type=int, help="number of iterations N")
    common.add_argument("--replications", type=int, help="number of seeds")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--format", choices=("csv", "summary", "both"), help="which outputs to write")
    p = argparse.ArgumentParser(prog="aoisa", description="Distributed SA with Age-of-Information delays")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate the configured iteration")
    a = sub.add_parser("verify-aoi", parents=[common], help="last index where tau(n) exceeds a fraction of n")
    a.add_argument("--model", type=str, help="delay model spec (overrides the config)")
    w = sub.add_parser("verify-window", parents=[common], help="decade maxima of stepsize windows over delays")
    w.add_argument("--model", type=str, help="delay model spec (overrides the config)")
    g = sub.add_parser("verify-gronwall", parents=[common], help="randomised Gronwall-inequality checks")
    g.add_argument("--random", type=int, default=1000, help="number of random instances")
    sub.add_parser("sgd", parents=[common], help="delayed distributed SGD experiment")
    sub.add_parser("momentum", parents=[common], help="heavy-ball vs plain twins")
    sub.add_parser("track", parents=[common], help="segment-wise ODE tracking of one run")
    return p


def _overrides(args) -> dict:
    return {
        ("run", "seed"): args.seed,
        ("run", "horizon"): args.horizon,
        ("run", "replications"): args.replications,
        ("output", "dir"): args.out,
        ("output", "format"): args.format,
    }


def _load(args, required=True) -> ExperimentConfig | None:
    if args.config is None:
        if required:
            raise ConfigFileMissing("--config is required for this command")
        return None
    return parse_config(args.config, _overrides(args))


def _equilibrium(cfg: ExperimentConfig):
    if cfg.objective is not None:
        return cfg.objective.minimizer()
    f = cfg.field
    try:
        if isinstance(f, LinearField):
            return np.zeros(f.dim)
        if isinstance(f, AffineField):
            return np.linalg.solve(f.M, -f.v)
    except np.linalg.LinAlgError:
        return None
    return None


# --------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _Outputs(cfg.out_dir, cfg.format)
    A = cfg.analysis
    sim = cfg.sim_config()
    axis = TimeAxis(cfg.schedule, T=A["T"], horizon=cfg.horizon)
    target = _equilibrium(cfg)
    bound = A["bound_factor"] * (1.0 + np.linalg.norm(cfg.x1) + (np.linalg.norm(target) if target is not None else 0.0))
    rows, hists = [], []
    for chunk in batched(cfg.seeds, cfg.horizon, cfg.field.dim * (2 if cfg.variant == "heavy-ball" else 1)):
        for h in run_batch(sim, chunk):
            out.csv(f"history_seed{h.seed}.csv", history_csv(h))
            err = float(np.linalg.norm(h.final - target)) if target is not None else None
            wsum = window_sum(axis, len(h.tau), int(h.tau[-1].max())) if len(h.tau) else 0.0
            dtail = None
            if h.g is not None:
                ser = momentum_split_series(h.g, cfg.beta, rule=cfg.tau_rule, schedule=cfg.schedule)
                tail = ser.delta_norm[A["n0"] - 1 :]
                dtail = float(tail.max()) if len(tail) else 0.0
            rows.append((h.seed, h.verdict, err, h.max_norm(), wsum, dtail))
            hists.append(h)
    summary = {
        "command": "run",
        "config_hash": config_hash(cfg.raw),
        "variant": cfg.variant,
        "horizon": cfg.horizon,
        "replications": cfg.replications,
        "seed": cfg.seed,
        "diverged": sum(h.verdict == "diverged" for h in hists),
        "aborted": sum(h.verdict == "aborted" for h in hists),
    }
    checks = _run_verifiers(cfg, hists, axis, rows, bound, target, summary, out)
    for k, v in checks.items():
        summary[f"check.{k}"] = "pass" if v else "fail"
    diverged = summary["diverged"] > 0
    summary["verdict"] = "diverged" if diverged else ("pass" if all(checks.values()) else "fail")
    out.csv("runs.csv", csv_text(("seed", "verdict", "final_error", "max_norm", "final_window_sum", "max_delta_tail"), rows))
    out.summary("summary.txt", summary)
    if diverged:
        return EXIT_DIVERGED
    return EXIT_OK if all(checks.values()) else EXIT_VERIFIER


def _run_verifiers(cfg, hists: list[SimHistory], axis, rows, bound, target, summary, out) -> dict:
    A = cfg.analysis
    checks = {}
    done = [h for h in hists if h.completed]
    for name in cfg.verifiers():
        if name == "aoi":
            paths = [h.tau.reshape(len(h.tau), -1).max(axis=1) for h in hists]
            rep = an.verify_lemma_aoi(paths, cfg.p, A["eps"], A["aoi_limit"] or cfg.horizon, A["aoi_required"])
            summary["aoi.passing_seeds"] = rep.n_pass
            checks["aoi"] = rep.passed
        elif name == "window":
            reps = [an.verify_lemma_window(h, axis, A["burn_in"], A["window_tol"]) for h in hists]
            need = A["window_required"] if A["window_required"] is not None else len(reps)
            summary["window.passing_seeds"] = sum(r.passed for r in reps)
            summary["window.max_final_decade"] = max(r.final_max for r in reps)
            checks["window"] = summary["window.passing_seeds"] >= need
        elif name == "stability":
            mx = max(r[3] for r in rows)
            summary["stability.max_norm"] = mx
            summary["stability.bound"] = bound
            checks["stability"] = len(done) == len(hists) and mx <= bound
        elif name == "convergence":
            if target is None:
                summary["convergence.note"] = "no analytic equilibrium for this drift"
                checks["convergence"] = False
            else:
                med = float(np.median([r[2] for r in rows]))
                summary["convergence.median_final_error"] = med
                checks["convergence"] = med < A["error_tol"]
        elif name == "tracking" and hists:
            h = hists[0]
            rp = an.build_rescaled(h, axis, cfg.field)
            res = an.tracking_errors(rp)
            trend = an.tracking_trend([r.error for r in res if r.complete], int(A["tracking_burn_in"]), A["tracking_slack"], A["tracking_tol"])
            trend.final_error = res[-1].error
            out.csv("tracking.csv", csv_text(("m", "T_m", "T_m1", "s_m", "error", "complete"), ((r.m, r.T0, r.T1, r.s, r.error, r.complete) for r in res)))
            summary["tracking.final_error"] = trend.final_error
            summary["tracking.violations"] = len(trend.violations)
            checks["tracking"] = trend.passed
        elif name == "noise" and hists:
            rp = an.build_rescaled(hists[0], axis, cfg.field)
            probe = an.noise_convergence_probe(rp, int(A["n0"]) if A["n0"] < cfg.horizon else None, factor=A["noise_factor"])
            summary["noise.oscillation"] = probe.oscillation
            summary["noise.tolerance"] = probe.tol
            checks["noise"] = probe.passed
        elif name == "momentum":
            tails = [r[5] for r in rows if r[5] is not None]
            if not tails or A["delta_tol"] is None:
                summary["momentum.note"] = "needs the heavy-ball variant and analysis.delta_tol"
                checks["momentum"] = False
            else:
                summary["momentum.max_delta_tail"] = max(tails)
                checks["momentum"] = max(tails) < A["delta_tol"]
    return checks


def _model_and_params(args):
    cfg = _load(args, required=False)
    A = dict(ANALYSIS_DEFAULTS if cfg is None else cfg.analysis)
    if args.model:
        model = parse_model(args.model)
    elif cfg is not None:
        model = cfg.delays[0][1] if len(cfg.delays) > 1 else cfg.delays[0][0]
    else:
        model = AoiModel.bernoulli(0.2)
    horizon = args.horizon or (cfg.horizon if cfg else 100_000)
    reps = args.replications or (cfg.replications if cfg else 20)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    p = cfg.p if cfg else 1.0
    out = _Outputs(args.out or (cfg.out_dir if cfg else "out"), args.format or (cfg.format if cfg else "both"))
    return cfg, A, model, horizon, reps, seed, p, out


def cmd_verify_aoi(args) -> int:
    cfg, A, model, N, R, seed, p, out = _model_and_params(args)
    traces = [trace(model, N, seed + r) for r in range(R)]
    rep = an.verify_lemma_aoi(traces, p, A["eps"], A["aoi_limit"] or N, A["aoi_required"])
    out.csv("aoi.csv", csv_text(("seed", "last_exceedance"), ((seed + r, v) for r, v in enumerate(rep.last_exceedance))))
    out.summary("aoi_summary.txt", {
        "command": "verify-aoi", "model": model.label, "p": p, "eps": A["eps"], "horizon": N,
        "replications": R, "limit": rep.limit, "required": rep.required, "passing_seeds": rep.n_pass,
        "verdict": "pass" if rep.passed else "fail",
    })
    return EXIT_OK if rep.passed else EXIT_VERIFIER


def cmd_verify_window(args) -> int:
    cfg, A, model, N, R, seed, p, out = _model_and_params(args)
    schedule = cfg.schedule if cfg else StepSchedule.for_moment(p)
    axis = TimeAxis(schedule, horizon=N)
    reps = [an.verify_lemma_window(trace(model, N, seed + r), axis, A["burn_in"], A["window_tol"]) for r in range(R)]
    need = A["window_required"] if A["window_required"] is not None else R
    n_pass = sum(r.passed for r in reps)
    table = []
    for r, rep in enumerate(reps):
        table.extend((seed + r, int(k), v) for k, v in zip(rep.decades, rep.maxima))
    out.csv("window_decades.csv", csv_text(("seed", "decade", "max_window_sum"), table))
    out.summary("window_summary.txt", {
        "command": "verify-window", "model": model.label, "schedule": repr(schedule), "horizon": N,
        "replications": R, "burn_in": A["burn_in"], "tol": A["window_tol"], "required": need,
        "passing_seeds": n_pass, "max_final_decade": max(r.final_max for r in reps),
        "verdict": "pass" if n_pass >= need else "fail",
    })
    return EXIT_OK if n_pass >= need else EXIT_VERIFIER


def cmd_verify_gronwall(args) -> int:
    cfg = _load(args, required=False)
    K = args.random
    if K < 1:
        raise ParameterError("--random must be >= 1")
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    horizon = args.horizon or 500
    out = _Outputs(args.out or (cfg.out_dir if cfg else "out"), args.format or (cfg.format if cfg else "both"))
    rng = np.random.default_rng([seed, 3])
    rows, counts = [], {}
    for k in range(K):
        inst = an.gronwall_equality_instance(rng, horizon)
        v = an.gronwall_bound_check(inst)
        counts[v.status] = counts.get(v.status, 0) + 1
        rows.append(("new", k, inst.C, v.N, v.status, v.max_ratio))
    c_fail = 0
    for k in range(K):
        x, a, C, L = an.classical_equality_instance(rng, horizon)
        v = an.classical_gronwall_check(x, a, C, L)
        c_fail += not v.passed
        rows.append(("classical", k, C, None, v.status, None))
    new_fail = counts.get("bound-violated", 0) + counts.get("hypothesis-violated", 0)
    ok = new_fail == 0 and c_fail == 0
    out.csv("gronwall.csv", csv_text(("lemma", "instance", "C", "N", "status", "max_ratio"), rows))
    out.summary("gronwall_summary.txt", {
        "command": "verify-gronwall", "instances": K, "seed": seed, "horizon": horizon,
        "new.pass": counts.get("pass", 0), "new.threshold_not_found": counts.get("threshold-not-found", 0),
        "new.failures": new_fail, "classical.failures": c_fail, "verdict": "pass" if ok else "fail",
    })
    return EXIT_OK if ok else EXIT_VERIFIER


def cmd_sgd(args) -> int:
    cfg = _load(args)
    if cfg.objective is None:
        raise ConfigError(["[drift] kind must be quadratic-objective for the sgd command"])
    A = cfg.analysis
    spec = SgdExperiment(cfg.objective, cfg.delays, cfg.p, cfg.schedule, cfg.horizon, cfg.replications, cfg.seed, cfg.x1, A["error_tol"], A["bound_factor"])
    rep = run_sgd_experiment(spec)
    out = _Outputs(cfg.out_dir, cfg.format)
    out.csv("sgd_seeds.csv", rep.csv_text())
    if out.fmt in ("summary", "both"):
        out.written.append(atomic_write(out.dir / "sgd_summary.txt", rep.summary_text()))
    if rep.n_diverged:
        return EXIT_DIVERGED
    return EXIT_OK if rep.passed else EXIT_VERIFIER


def cmd_momentum(args) -> int:
    cfg = _load(args)
    A = cfg.analysis
    spec = MomentumExperiment(
        cfg.beta, field=None if cfg.objective is not None else cfg.field, noise=cfg.noise, objective=cfg.objective,
        delays=cfg.delays, schedule=cfg.schedule, horizon=cfg.horizon, replications=cfg.replications, seed=cfg.seed,
        x1=cfg.x1, n0=int(A["n0"]), gap_tol=A["gap_tol"], delta_tol=A["delta_tol"], tau_rule=cfg.tau_rule,
    )
    rep = run_momentum_experiment(spec)
    out = _Outputs(cfg.out_dir, cfg.format)
    out.csv("momentum_seeds.csv", rep.csv_text())
    out.csv("momentum_twins.csv", csv_text(("seed", "plain_verdict", "twin_gap"), rep.extra_rows))
    if out.fmt in ("summary", "both"):
        out.written.append(atomic_write(out.dir / "momentum_summary.txt", rep.summary_text()))
    if rep.summary["diverged"]:
        return EXIT_DIVERGED
    return EXIT_OK if rep.passed else EXIT_VERIFIER


def cmd_track(args) -> int:
    cfg = _load(args)
    A = cfg.analysis
    h = run_batch(cfg.sim_config(), [cfg.seed])[0]
    out = _Outputs(cfg.out_dir, cfg.format)
    if not h.completed:
        out.summary("track_summary.txt", {"command": "track", "seed": cfg.seed, "verdict": h.verdict, "stopped_at": h.stopped_at})
        return EXIT_DIVERGED if h.verdict == "diverged" else EXIT_VERIFIER
    axis = TimeAxis(cfg.schedule, T=A["T"], horizon=cfg.horizon)
    rp = an.build_rescaled(h, axis, cfg.field)
    res = an.tracking_errors(rp)
    trend = an.tracking_trend([r.error for r in res if r.complete], int(A["tracking_burn_in"]), A["tracking_slack"], A["tracking_tol"])
    trend.final_error = res[-1].error
    n0 = int(A["n0"]) if A["n0"] < cfg.horizon else None
    probe = an.noise_convergence_probe(rp, n0, factor=A["noise_factor"])
    out.csv("tracking.csv", csv_text(("m", "T_m", "T_m1", "s_m", "error", "complete"), ((r.m, r.T0, r.T1, r.s, r.error, r.complete) for r in res)))
    ok = trend.passed and probe.passed
    out.summary("track_summary.txt", {
        "command": "track", "config_hash": config_hash(cfg.raw), "seed": cfg.seed, "horizon": cfg.horizon,
        "T": A["T"], "segments": len(res), "final_error": trend.final_error, "tracking_tol": A["tracking_tol"],
        "trend_violations": " ".join(map(str, trend.violations)), "s_final": float(rp.s[-1]),
        "noise.oscillation": probe.oscillation, "noise.tolerance": probe.tol,
        "check.tracking": "pass" if trend.passed else "fail", "check.noise": "pass" if probe.passed else "fail",
        "verdict": "pass" if ok else "fail",
    })
    return EXIT_OK if ok else EXIT_VERIFIER


COMMANDS = {
    "run": cmd_run,
    "verify-aoi": cmd_verify_aoi,
    "verify-window": cmd_verify_window,
    "verify-gronwall": cmd_verify_gronwall,
    "sgd": cmd_sgd,
    "momentum": cmd_momentum,
    "track": cmd_track,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigFileMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except CrossFieldError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CROSS
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
