"""Age-of-Information processes: models, seeded generators and path diagnostics.

Every model is driven by one uniform draw per event from a numpy ``Generator``,
so the step-wise state machine (:class:`AoiGenerator`) and the vectorised
batch generator (:func:`generate`) emit the same path for the same seed.

Conventions
-----------
Paths are indexed from ``n = 1``; refresh-type generators start from age 0 before ``n = 1``.
``trace.values[n - 1]`` holds ``tau(n)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "AoiModel",
    "AoiTrace",
    "AoiGenerator",
    "DominanceSpec",
    "AoiValidationError",
    "ParameterError",
    "KINDS",
    "pair_rng",
    "generate",
    "next_aoi",
    "trace",
    "path_violations",
    "exceedance_threshold",
    "validate_path",
    "load_scripted",
    "parse_model",
    "empirical_moment",
    "fraction_exceedance",
    "dominance",
]

KINDS = (
    "zero",
    "constant",
    "bounded-uniform",
    "bernoulli-refresh",
    "pareto-refresh",
    "walk-with-reset",
    "scripted",
)

# stream tag used when deriving per-pair AoI generators from a master seed
AOI_STREAM = 0


class ParameterError(ValueError):
    """Invalid numeric parameter passed to a model or diagnostic."""


class AoiValidationError(ValueError):
    """A path violates the AoIP axioms."""


@dataclass(frozen=True)
class AoiModel:
    """A delay model.

    ``params`` depends on ``kind``:

    * ``zero``: none
    * ``constant``: ``c`` (int >= 0)
    * ``bounded-uniform``: ``B`` (int >= 0); each step a sample of age
      ``U ~ Uniform{0..B}`` arrives and the freshest one is kept
    * ``bernoulli-refresh``: ``q`` in [0, 1]; reset to 0 w.p. ``q``, else +1
    * ``pareto-refresh``: ``alpha > 0``; renewal process whose gaps satisfy
      ``P(G >= k) = k**-(alpha + 1)``, so the age tail decays like ``m**-alpha``
    * ``walk-with-reset``: ``q`` in [0, 1], ``up`` in [0, 1] (default 0.5);
      reset w.p. ``q``, else +1 w.p. ``up`` or -1 (floored at 0)
    * ``scripted``: ``path`` (tuple of ints), replayed verbatim
    """

    kind: str
    params: dict = field(default_factory=dict)
    seed_offset: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown AoI model kind {self.kind!r}")
        p = self.params
        if self.kind == "constant":
            c = p.get("c")
            if not isinstance(c, (int, np.integer)) or c < 0:
                raise ParameterError("constant model needs integer c >= 0")
        elif self.kind == "bounded-uniform":
            b = p.get("B")
            if not isinstance(b, (int, np.integer)) or b < 0:
                raise ParameterError("bounded-uniform model needs integer B >= 0")
        elif self.kind in ("bernoulli-refresh", "walk-with-reset"):
            q = p.get("q")
            if q is None or not 0.0 <= q <= 1.0:
                raise ParameterError(f"{self.kind} needs q in [0, 1]")
            if self.kind == "walk-with-reset" and not 0.0 <= p.get("up", 0.5) <= 1.0:
                raise ParameterError("walk-with-reset needs up in [0, 1]")
        elif self.kind == "pareto-refresh":
            alpha = p.get("alpha")
            if alpha is None or not alpha > 0:
                raise ParameterError("pareto-refresh needs alpha > 0")
        elif self.kind == "scripted":
            path = p.get("path")
            if path is None or len(path) == 0:
                raise ParameterError("scripted model needs a non-empty path")
            validate_path(np.asarray(path))

    # convenience constructors ------------------------------------------------

    @classmethod
    def zero(cls) -> "AoiModel":
        return cls("zero")

    @classmethod
    def constant(cls, c: int) -> "AoiModel":
        return cls("constant", {"c": int(c)})

    @classmethod
    def bounded_uniform(cls, B: int) -> "AoiModel":
        return cls("bounded-uniform", {"B": int(B)})

    @classmethod
    def bernoulli(cls, q: float) -> "AoiModel":
        return cls("bernoulli-refresh", {"q": float(q)})

    @classmethod
    def pareto(cls, alpha: float) -> "AoiModel":
        return cls("pareto-refresh", {"alpha": float(alpha)})

    @classmethod
    def walk(cls, q: float, up: float = 0.5) -> "AoiModel":
        return cls("walk-with-reset", {"q": float(q), "up": float(up)})

    @classmethod
    def scripted(cls, path) -> "AoiModel":
        return cls("scripted", {"path": tuple(int(v) for v in path)})

    @property
    def label(self) -> str:
        if self.kind == "scripted":
            return f"scripted(len={len(self.params['path'])})"
        if not self.params:
            return self.kind
        args = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in self.params.values())
        return f"{self.kind}({args})"

    @property
    def is_random(self) -> bool:
        return self.kind not in ("zero", "constant", "scripted")


@dataclass(frozen=True)
class AoiTrace:
    values: np.ndarray
    model_id: str = ""
    seed: int | None = None

    def __post_init__(self):
        if len(self.values) < 1:
            raise AoiValidationError("trace must have length >= 1")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DominanceSpec:
    """Moment order ``p`` and, when known, the survival function of a dominating variable."""

    p: float
    survival: object = None  # callable m -> P(tau_bar > m), or None
    moment_finite: bool | None = None

    def __post_init__(self):
        if not self.p > 0:
            raise ParameterError("moment order p must be positive")


# --------------------------------------------------------------------------
# seeding


def pair_rng(master_seed: int, i: int = 0, j: int = 0, offset: int = 0) -> np.random.Generator:
    """Independent stream for pair ``(i, j)``; other pairs never perturb it."""
    return np.random.default_rng([int(master_seed), AOI_STREAM, int(i), int(j), int(offset)])


# --------------------------------------------------------------------------
# step-wise generator


_GAP_TABLE_SIZE = 1 << 16
_gap_tables: dict[float, np.ndarray] = {}


def _pareto_gaps(u: np.ndarray, alpha: float) -> np.ndarray:
    """Gaps with ``P(G >= k) = k**-(alpha + 1)`` by inversion of ``U = 1 - u``.

    ``G = #{k >= 1 : k**-(alpha+1) >= U}``, looked up in a shared table so the
    scalar and vectorised paths agree bit for bit.
    """
    table = _gap_tables.get(alpha)
    if table is None:
        k = np.arange(1, _GAP_TABLE_SIZE + 1, dtype=float)
        table = -(k ** -(alpha + 1.0))  # increasing
        _gap_tables[alpha] = table
    U = 1.0 - np.asarray(u, dtype=float)
    gaps = np.searchsorted(table, -U, side="right").astype(np.int64)
    far = np.nonzero(gaps == _GAP_TABLE_SIZE)[0]
    for idx in far:  # U below the table: rare, fall back to the closed form
        gaps[idx] = max(_GAP_TABLE_SIZE, int(math.floor(U[idx] ** (-1.0 / (alpha + 1.0)))))
    return gaps


class AoiGenerator:
    """Single-threaded state machine producing ``tau(1), tau(2), ...``."""

    def __init__(self, model: AoiModel, rng: np.random.Generator | int | None = None):
        self.model = model
        if rng is None or isinstance(rng, (int, np.integer)):
            rng = pair_rng(0 if rng is None else int(rng), offset=model.seed_offset)
        self.rng = rng
        self.n = 0
        self.tau = 0
        self._next_refresh = 0  # pareto-refresh: absolute time of the next renewal
        if model.kind == "pareto-refresh":
            self._next_refresh = int(_pareto_gaps([self.rng.random()], model.params["alpha"])[0])

    def __iter__(self):
        return self

    def __next__(self) -> int:
        return self.step()

    def step(self) -> int:
        m = self.model
        n = self.n + 1
        k = m.kind
        if k == "zero":
            tau = 0
        elif k == "constant":
            tau = m.params["c"]
        elif k == "scripted":
            path = m.params["path"]
            if n > len(path):
                raise IndexError(f"scripted path exhausted at n={n}")
            tau = path[n - 1]
        elif k == "bernoulli-refresh":
            tau = 0 if self.rng.random() < m.params["q"] else self.tau + 1
        elif k == "bounded-uniform":
            age = int(self.rng.random() * (m.params["B"] + 1))
            tau = min(self.tau + 1, age)
        elif k == "walk-with-reset":
            u = self.rng.random()
            q, up = m.params["q"], m.params.get("up", 0.5)
            if u < q:
                tau = 0
            elif u < q + (1.0 - q) * up:
                tau = self.tau + 1
            else:
                tau = max(self.tau - 1, 0)
        elif k == "pareto-refresh":
            if n == self._next_refresh:
                tau = 0
                self._next_refresh = n + int(_pareto_gaps([self.rng.random()], m.params["alpha"])[0])
            else:
                tau = self.tau + 1
        else:  # pragma: no cover - guarded by AoiModel
            raise ParameterError(k)
        self.n, self.tau = n, tau
        return tau


def next_aoi(model: AoiModel, n: int, state: AoiGenerator) -> int:
    """Advance ``state`` to time ``n`` and return ``tau(n)``."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if state.model != model:
        raise ParameterError("generator state belongs to a different model")
    if n != state.n + 1:
        raise ParameterError(f"generator is at n={state.n}; next index is {state.n + 1}, got {n}")
    return state.step()


# --------------------------------------------------------------------------
# batch generation


def _age_from_refreshes(refresh: np.ndarray) -> np.ndarray:
    # refresh[n-1] is True when tau(n) = 0; tau(0) = 0 acts as a refresh at time 0
    n = np.arange(1, len(refresh) + 1, dtype=np.int64)
    last = np.maximum.accumulate(np.where(refresh, n, 0))
    return n - last


def generate(model: AoiModel, length: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Vectorised ``tau(1..length)``; identical to iterating :class:`AoiGenerator`."""
    if length < 0:
        raise ParameterError("length must be non-negative")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = pair_rng(0 if rng is None else int(rng), offset=model.seed_offset)
    k, p = model.kind, model.params
    N = int(length)
    if k == "zero":
        return np.zeros(N, dtype=np.int64)
    if k == "constant":
        return np.full(N, p["c"], dtype=np.int64)
    if k == "scripted":
        path = p["path"]
        if N > len(path):
            raise IndexError(f"scripted path has {len(path)} entries, {N} requested")
        return np.asarray(path[:N], dtype=np.int64)
    if k == "bernoulli-refresh":
        return _age_from_refreshes(rng.random(N) < p["q"])
    if k == "bounded-uniform":
        ages = (rng.random(N) * (p["B"] + 1)).astype(np.int64)
        n = np.arange(0, N + 1, dtype=np.int64)
        # tau(n) = min_{0<=k<=n} (age_k + n - k), with age_0 = 0
        return (n + np.minimum.accumulate(np.concatenate(([0], ages)) - n))[1:]
    if k == "walk-with-reset":
        u = rng.random(N)
        q, up = p["q"], p.get("up", 0.5)
        reset = u < q
        step = np.where(u < q + (1.0 - q) * up, 1, -1).astype(np.int64)
        step[reset] = 0
        # reflected walk restarted at each reset: S - segmentwise running min of S
        s = np.concatenate(([0], np.cumsum(step)))
        seg = np.concatenate(([0], np.cumsum(reset)))
        big = 4 * (N + 2)
        shifted = s - seg * big
        tau = shifted - np.minimum.accumulate(shifted)
        return tau[1:]
    if k == "pareto-refresh":
        alpha = p["alpha"]
        times = []
        t = 0
        while t <= N:
            # one uniform per renewal, drawn in chunks: same stream as the step-wise generator
            u = rng.random(max(64, N // 4))
            gaps = _pareto_gaps(u, alpha)
            ts = t + np.cumsum(gaps)
            times.append(ts)
            t = int(ts[-1])
        times = np.concatenate(times)
        times = times[times <= N]
        refresh = np.zeros(N, dtype=bool)
        refresh[times - 1] = True
        return _age_from_refreshes(refresh)
    raise ParameterError(k)  # pragma: no cover


def trace(model: AoiModel, length: int, seed: int = 0, i: int = 0, j: int = 0) -> AoiTrace:
    rng = pair_rng(seed, i, j, model.seed_offset)
    return AoiTrace(generate(model, length, rng), model_id=model.label, seed=seed)


# --------------------------------------------------------------------------
# validation and scripted files


def path_violations(values) -> tuple[int, int]:
    """Counts of (unit-growth violations, freshness-index decreases) over consecutive ``n >= 1``."""
    v = np.asarray(values, dtype=np.int64)
    growth = int(np.count_nonzero(v[1:] > v[:-1] + 1))
    n = np.arange(1, len(v) + 1, dtype=np.int64)
    fresh = n - v
    monotone = int(np.count_nonzero(fresh[1:] < fresh[:-1]))
    return growth, monotone


def validate_path(values) -> None:
    v = np.asarray(values)
    if v.ndim != 1 or len(v) == 0:
        raise AoiValidationError("path must be a non-empty 1-d sequence")
    if not np.issubdtype(v.dtype, np.integer):
        if not np.all(np.equal(np.mod(v, 1), 0)):
            raise AoiValidationError("path entries must be integers")
    if np.any(v < 0):
        n = int(np.argmax(v < 0)) + 1
        raise AoiValidationError(f"negative age at n={n}")
    v = v.astype(np.int64)
    prev = np.concatenate(([v[0]], v[:-1]))
    bad = np.nonzero(v[1:] > prev[1:] + 1)[0]
    if len(bad):
        n = int(bad[0]) + 2
        raise AoiValidationError(f"unit growth violated at n={n}: tau({n - 1})={v[n - 2]}, tau({n})={v[n - 1]}")


def load_scripted(path: str | Path) -> AoiModel:
    """Read one non-negative integer per line; line 1 is ``tau(1)``."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if not re.fullmatch(r"\d+", s):
            raise AoiValidationError(f"{path}:{lineno}: expected a non-negative integer, got {s!r}")
        values.append(int(s))
    validate_path(values)
    return AoiModel.scripted(values)


_SPEC_RE = re.compile(r"^\s*([a-z-]+)\s*(?:\((.*)\))?\s*$")


def parse_model(text: str, base_dir: str | Path | None = None) -> AoiModel:
    """Parse ``kind`` or ``kind(arg, ...)``, e.g. ``bernoulli-refresh(0.2)``."""
    m = _SPEC_RE.match(text)
    if not m:
        raise ParameterError(f"cannot parse delay model {text!r}")
    kind, arg = m.group(1), m.group(2)
    args = [a.strip() for a in arg.split(",")] if arg else []
    try:
        if kind == "zero" and not args:
            return AoiModel.zero()
        if kind == "constant" and len(args) == 1:
            return AoiModel.constant(int(args[0]))
        if kind == "bounded-uniform" and len(args) == 1:
            return AoiModel.bounded_uniform(int(args[0]))
        if kind == "bernoulli-refresh" and len(args) == 1:
            return AoiModel.bernoulli(float(args[0]))
        if kind == "pareto-refresh" and len(args) == 1:
            return AoiModel.pareto(float(args[0]))
        if kind == "walk-with-reset" and len(args) in (1, 2):
            return AoiModel.walk(*(float(a) for a in args))
        if kind == "scripted" and len(args) == 1:
            p = Path(args[0])
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            return load_scripted(p)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ParameterError, AoiValidationError)):
            raise
        raise ParameterError(f"bad arguments in delay model {text!r}: {exc}") from None
    raise ParameterError(f"cannot parse delay model {text!r}")


# --------------------------------------------------------------------------
# diagnostics


def _values(trace_or_values) -> np.ndarray:
    v = trace_or_values.values if isinstance(trace_or_values, AoiTrace) else trace_or_values
    v = np.asarray(v)
    if len(v) == 0:
        raise ParameterError("trace is empty")
    return v


def empirical_moment(trace: AoiTrace, p: float) -> float:
    """``(1/N) sum_n tau(n)**p``."""
    if not p > 0:
        raise ParameterError("moment order p must be positive")
    v = _values(trace).astype(float)
    return float(np.mean(v**p))


def exceedance_threshold(n: np.ndarray, eps: float, p: float) -> np.ndarray:
    return eps * n if p <= 1 else eps * n ** (1.0 / p)


def fraction_exceedance(trace: AoiTrace, eps: float, p: float) -> int | None:
    """Largest ``n`` with ``tau(n) > eps*n`` (``p <= 1``) or ``tau(n) > eps*n**(1/p)``; ``None`` if never."""
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    if not p > 0:
        raise ParameterError("moment order p must be positive")
    v = _values(trace)
    n = np.arange(1, len(v) + 1, dtype=float)
    bad = np.nonzero(v > exceedance_threshold(n, eps, p))[0]
    return int(bad[-1]) + 1 if len(bad) else None


def dominance(model: AoiModel, p: float) -> DominanceSpec:
    """Analytic dominating survival function where the model admits one."""
    k, prm = model.kind, model.params
    if k == "zero":
        return DominanceSpec(p, lambda m: 0.0, True)
    if k == "constant":
        c = prm["c"]
        return DominanceSpec(p, lambda m: 1.0 if m < c else 0.0, True)
    if k == "bounded-uniform":
        b = prm["B"]
        return DominanceSpec(p, lambda m: 1.0 if m < b else 0.0, True)
    if k == "bernoulli-refresh":
        q = prm["q"]
        if q == 0:
            return DominanceSpec(p, None, None)
        return DominanceSpec(p, lambda m: (1.0 - q) ** (m + 1), True)
    if k == "pareto-refresh":
        a = prm["alpha"]

        # P(tau(n) > m) <= sum_{j > m} P(G >= j+1) ~ m**-alpha
        def surv(m, a=a):
            j = np.arange(int(m) + 2, int(m) + 2 + 200_000, dtype=float)
            return float(min(1.0, np.sum(j ** -(a + 1.0)) + (j[-1] ** -a) / a))

        return DominanceSpec(p, surv, p < a)
    return DominanceSpec(p, None, None)
