"""Experiment configuration files.

An INI document (``configparser``) whose values are JSON, with bare words
accepted as strings.  Sections and keys::

    [drift]     kind = linear | affine | quadratic-objective | regularized | scripted-table
                matrix, offset, blocks           (linear, affine, regularized)
                amplitude, kappa                 (regularized: affine + amplitude*sin(x) - 2 kappa x)
                A_support, b_support, A_probs, b_probs, blocks   (quadratic-objective)
                grid, values                     (scripted-table)
    [noise]     kind = zero | gaussian-scaled | bounded-uniform ; scale
    [delays]    default, diagonal, i,j = model spec such as "bernoulli-refresh(0.2)" ; p
    [schedule]  regime = harmonic | power | auto ; a ; q
    [run]       variant = plain | heavy-ball ; beta ; horizon ; seed ; replications ; x1 ;
                tau_rule = log | time ; history_cap
    [analysis]  verifiers (list) and tolerances, see ANALYSIS_DEFAULTS
    [output]    dir ; format = csv | summary | both

Every problem found is collected before reporting; schema problems and
cross-field inconsistencies are reported as distinct error classes.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aoi import ParameterError, parse_model
from .dynamics import (
    AffineField,
    CallableField,
    DimensionError,
    DriftField,
    LinearField,
    NoiseModel,
    QuadraticObjective,
    RegularizedField,
    TableField,
)
from .engine import SimConfig, delay_matrix
from .schedule import StepSchedule

__all__ = [
    "ConfigError",
    "ConfigFileMissing",
    "SchemaError",
    "CrossFieldError",
    "ExperimentConfig",
    "parse_config",
    "parse_config_text",
    "ANALYSIS_DEFAULTS",
    "VERIFIERS",
]

DRIFT_KINDS = ("linear", "affine", "quadratic-objective", "regularized", "scripted-table")
VERIFIERS = ("aoi", "window", "stability", "convergence", "tracking", "noise", "momentum")

ANALYSIS_DEFAULTS = {
    "verifiers": [],
    "eps": 0.05,  # aoi lemma fraction
    "aoi_limit": None,  # last exceedance must lie below this (default: horizon)
    "aoi_required": None,  # seeds that must pass (default: all)
    "window_tol": 0.05,
    "window_required": None,
    "burn_in": 1000,
    "error_tol": 1e-2,
    "bound_factor": 100.0,
    "T": 1.0,
    "tracking_tol": 0.1,
    "tracking_burn_in": 5,
    "tracking_slack": 0.2,
    "noise_factor": 10.0,
    "n0": 1000,
    "gap_tol": 1e-2,
    "delta_tol": None,
}

SECTION_KEYS = {
    "drift": {"kind", "matrix", "offset", "blocks", "amplitude", "kappa", "A_support", "b_support", "A_probs", "b_probs", "grid", "values"},
    "noise": {"kind", "scale"},
    "delays": {"default", "diagonal", "p"},  # plus "i,j"
    "schedule": {"regime", "a", "q"},
    "run": {"variant", "beta", "horizon", "seed", "replications", "x1", "tau_rule", "history_cap"},
    "analysis": set(ANALYSIS_DEFAULTS),
    "output": {"dir", "format"},
}


class ConfigError(Exception):
    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


class ConfigFileMissing(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


class CrossFieldError(ConfigError):
    pass


@dataclass
class ExperimentConfig:
    field: DriftField
    objective: QuadraticObjective | None
    noise: NoiseModel
    delays: list
    p: float
    schedule: StepSchedule
    variant: str
    beta: float
    horizon: int
    seed: int
    replications: int
    x1: np.ndarray
    tau_rule: str
    history_cap: int | None
    analysis: dict
    out_dir: str
    format: str
    raw: dict = field(default_factory=dict)

    def sim_config(self, seed: int | None = None, horizon: int | None = None) -> SimConfig:
        return SimConfig(
            self.field,
            self.schedule,
            self.horizon if horizon is None else horizon,
            self.x1,
            delays=self.delays,
            noise=self.noise,
            seed=self.seed if seed is None else seed,
            variant=self.variant,
            beta=self.beta,
            tau_rule=self.tau_rule,
            objective=self.objective,
            history_cap=self.history_cap,
        )

    @property
    def seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.replications)]

    def verifiers(self) -> list[str]:
        return list(self.analysis["verifiers"])


def _value(text: str):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, ValueError):
        return text.strip()


def parse_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigFileMissing(f"config file not found: {path}")
    return parse_config_text(path.read_text(), base_dir=path.parent, overrides=overrides)


def parse_config_text(text: str, base_dir: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate; raises :class:`SchemaError` or :class:`CrossFieldError` listing every problem.

    ``overrides`` maps ``(section, key)`` to values applied after parsing (command-line flags).
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SchemaError([f"malformed config: {exc}"]) from None
    raw: dict[str, dict] = {s: {} for s in SECTION_KEYS}
    errors: list[str] = []
    for sec in cp.sections():
        if sec not in SECTION_KEYS:
            errors.append(f"unknown section [{sec}]")
            continue
        for key, val in cp.items(sec):
            if key not in SECTION_KEYS[sec] and not (sec == "delays" and _is_pair(key)):
                errors.append(f"unknown key '{key}' in [{sec}]")
                continue
            if sec == "delays" and _is_pair(key):
                key = ",".join(k.strip() for k in key.strip("\"'").split(","))
            raw[sec][key] = _value(val)
    for (sec, key), val in (overrides or {}).items():
        if val is not None:
            raw[sec][key] = val
    builder = _Builder(raw, base_dir, errors)
    cfg = builder.build()
    if builder.errors:
        raise SchemaError(builder.errors)
    cross = _cross_checks(cfg, raw)
    if cross:
        raise CrossFieldError(cross)
    return cfg


def _is_pair(key: str) -> bool:
    parts = key.strip("\"'").split(",")
    return len(parts) == 2 and all(p.strip().isdigit() for p in parts)


class _Builder:
    def __init__(self, raw, base_dir, errors):
        self.raw, self.base_dir, self.errors = raw, base_dir, errors

    def err(self, msg):
        self.errors.append(msg)

    def get(self, sec, key, default=None, kind=None, required=False):
        v = self.raw[sec].get(key, default)
        if required and key not in self.raw[sec]:
            self.err(f"[{sec}] {key} is required")
            return default
        if v is None or kind is None:
            return v
        try:
            if kind is int:
                if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
                    raise ValueError
                return int(v)
            if kind is float:
                if isinstance(v, bool):
                    raise ValueError
                return float(v)
            if kind is str:
                if not isinstance(v, str):
                    raise ValueError
                return v
            if kind is list:
                if not isinstance(v, list):
                    raise ValueError
                return v
        except (TypeError, ValueError):
            self.err(f"[{sec}] {key}: expected {kind.__name__}, got {v!r}")
            return None
        return v

    def array(self, sec, key, required=True, ndim=None):
        v = self.get(sec, key, required=required)
        if v is None:
            return None
        try:
            a = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            self.err(f"[{sec}] {key}: not a numeric array")
            return None
        if ndim is not None and a.ndim != ndim:
            self.err(f"[{sec}] {key}: expected {ndim}-d array, got shape {a.shape}")
            return None
        return a

    def build(self) -> ExperimentConfig | None:
        fld, obj = self.drift()
        noise = self.noise()
        D = fld.D if fld is not None else 1
        delays, p = self.delays(D)
        schedule = self.schedule(p)
        r = self.raw["run"]
        variant = self.get("run", "variant", "plain", str)
        if variant not in (None, "plain", "heavy-ball"):
            self.err(f"[run] variant must be plain or heavy-ball, got {variant!r}")
        beta = self.get("run", "beta", 0.0, float)
        horizon = self.get("run", "horizon", 1000, int)
        if horizon is not None and horizon < 1:
            self.err("[run] horizon must be >= 1")
        seed = self.get("run", "seed", 0, int)
        reps = self.get("run", "replications", 1, int)
        if reps is not None and reps < 1:
            self.err("[run] replications must be >= 1")
        tau_rule = self.get("run", "tau_rule", "log", str)
        if tau_rule not in (None, "log", "time"):
            self.err("[run] tau_rule must be log or time")
        cap = self.get("run", "history_cap", None, int)
        x1 = self.array("run", "x1", required=False, ndim=None)
        if fld is not None:
            if x1 is None and "x1" not in r:
                x1 = np.ones(fld.dim)
            elif x1 is not None:
                x1 = np.atleast_1d(x1)
                if x1.shape != (fld.dim,):
                    self.err(f"[run] x1 has {x1.size} entries, drift dimension is {fld.dim}")
        analysis = dict(ANALYSIS_DEFAULTS)
        for k, v in self.raw["analysis"].items():
            analysis[k] = v
        ver = analysis["verifiers"]
        if isinstance(ver, str):
            ver = [ver]
        if not isinstance(ver, list) or any(v not in VERIFIERS for v in ver):
            self.err(f"[analysis] verifiers must be a list drawn from {', '.join(VERIFIERS)}")
        analysis["verifiers"] = ver if isinstance(ver, list) else []
        for k, v in analysis.items():
            if k != "verifiers" and v is not None and (not isinstance(v, (int, float)) or isinstance(v, bool)):
                self.err(f"[analysis] {k}: expected a number, got {v!r}")
        out_dir = self.get("output", "dir", "out", str)
        fmt = self.get("output", "format", "both", str)
        if fmt not in (None, "csv", "summary", "both"):
            self.err("[output] format must be csv, summary or both")
        if self.errors:
            return None
        return ExperimentConfig(
            fld, obj, noise, delays, p, schedule, variant, beta, horizon, seed, reps, x1, tau_rule, cap,
            analysis, out_dir, fmt, self.raw,
        )

    def drift(self):
        kind = self.get("drift", "kind", required=True, kind=str)
        if kind is None:
            return None, None
        if kind not in DRIFT_KINDS:
            self.err(f"[drift] kind must be one of {', '.join(DRIFT_KINDS)}, got {kind!r}")
            return None, None
        blocks = self.get("drift", "blocks", None, list)
        try:
            if kind == "linear":
                M = self.array("drift", "matrix", ndim=2)
                return (LinearField(M, blocks) if M is not None else None), None
            if kind in ("affine", "regularized"):
                M = self.array("drift", "matrix", ndim=2)
                v = self.array("drift", "offset", required=(kind == "affine"), ndim=1)
                if M is None:
                    return None, None
                if v is None:
                    v = np.zeros(M.shape[0])
                base = AffineField(M, v, blocks)
                if kind == "affine":
                    return base, None
                amp = self.get("drift", "amplitude", 0.0, float) or 0.0
                kappa = self.get("drift", "kappa", 0.0, float) or 0.0
                wavy = CallableField(
                    lambda X, base=base, amp=amp: base._eval_many(X) + amp * np.sin(X),
                    base.blocks,
                    lipschitz=(base.lipschitz or 0.0) + abs(amp),
                    limit=base.limit,
                    vectorized=True,
                )
                return RegularizedField(wavy, kappa), None
            if kind == "quadratic-objective":
                A = self.array("drift", "A_support")
                b = self.array("drift", "b_support")
                if A is None or b is None:
                    return None, None
                obj = QuadraticObjective(A, b, self.get("drift", "A_probs"), self.get("drift", "b_probs"), blocks)
                return obj.drift(), obj
            grid = self.array("drift", "grid", ndim=1)
            vals = self.array("drift", "values", ndim=1)
            if grid is None or vals is None:
                return None, None
            return TableField(grid, vals), None
        except (DimensionError, ParameterError, ValueError) as exc:
            self.err(f"[drift] {exc}")
            return None, None

    def noise(self):
        kind = self.get("noise", "kind", "zero", str)
        scale = self.get("noise", "scale", 0.0, float)
        try:
            return NoiseModel(kind or "zero", scale or 0.0)
        except ParameterError as exc:
            self.err(f"[noise] {exc}")
            return NoiseModel()

    def _model(self, key, text):
        if not isinstance(text, str):
            self.err(f"[delays] {key}: expected a model spec string")
            return None
        try:
            return parse_model(text, self.base_dir)
        except (ParameterError, ValueError, OSError) as exc:
            self.err(f"[delays] {key}: {exc}")
            return None

    def delays(self, D):
        sec = self.raw["delays"]
        default = self._model("default", sec.get("default", "zero"))
        diagonal = self._model("diagonal", sec.get("diagonal", "zero"))
        pairs = {}
        for key, val in sec.items():
            if _is_pair(key):
                i, j = (int(s) for s in key.split(","))
                if not (1 <= i <= D and 1 <= j <= D):
                    self.err(f"[delays] pair {key} outside 1..{D}")
                    continue
                m = self._model(key, val)
                if m is not None:
                    pairs[(i, j)] = m
        p = self.get("delays", "p", 1.0, float)
        if p is not None and not p > 0:
            self.err("[delays] p must be positive")
        if default is None or diagonal is None:
            return None, p
        return delay_matrix(D, default, diagonal, pairs), p

    def schedule(self, p):
        regime = self.get("schedule", "regime", "auto", str)
        a = self.get("schedule", "a", 1.0, float)
        q = self.get("schedule", "q", None, float)
        if regime not in (None, "auto", "harmonic", "power"):
            self.err(f"[schedule] regime must be harmonic, power or auto, got {regime!r}")
            return None
        if a is not None and not a > 0:
            self.err("[schedule] a must be positive")
            return None
        # regime/p consistency is a cross-field matter, checked later
        return {"regime": regime, "a": a, "q": q}


def _cross_checks(cfg: ExperimentConfig, raw) -> list[str]:
    errs = []
    sched = cfg.schedule
    p = cfg.p
    regime = sched["regime"]
    if regime == "auto":
        regime = "harmonic" if p <= 1 else "power"
    try:
        cfg.schedule = StepSchedule(regime, sched["a"], sched["q"], p)
    except ParameterError as exc:
        errs.append(f"[schedule] {exc}")
    if not 0.0 <= cfg.beta < 1.0:
        errs.append(f"[run] beta must lie in [0, 1), got {cfg.beta}")
    if cfg.variant == "plain" and cfg.beta != 0.0:
        errs.append("[run] beta given but variant is plain")
    if cfg.variant == "heavy-ball" and regime != "harmonic":
        errs.append("[run] heavy-ball needs a(n) in O(1/n): harmonic schedule")
    for row in cfg.delays:
        for m in row:
            if m.kind == "scripted" and len(m.params["path"]) < cfg.horizon:
                errs.append(f"[delays] scripted path shorter than horizon {cfg.horizon}")
    if cfg.objective is not None and not cfg.objective.min_eigenvalue() > 0:
        errs.append("[drift] E[A] + E[A]^T must be positive definite")
    # de-duplicate while keeping order
    return list(dict.fromkeys(errs))
