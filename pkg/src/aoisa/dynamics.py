"""Drift fields, scaled drifts, martingale-difference noise and stochastic objectives.

All fields use the Euclidean norm.  ``eval_many`` evaluates a stack of points
(one per row) and is what the engine calls once per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .aoi import ParameterError

__all__ = [
    "DimensionError",
    "DriftField",
    "LinearField",
    "AffineField",
    "CallableField",
    "TableField",
    "RegularizedField",
    "NoiseModel",
    "QuadraticObjective",
    "eval_drift",
    "eval_block",
    "scaled_drift",
    "limit_drift_probe",
    "sample_noise",
    "sgd_sample_drift",
    "regularize",
    "block_slices",
]


class DimensionError(ValueError):
    pass


def block_slices(blocks: Sequence[int]) -> list[slice]:
    out, start = [], 0
    for d in blocks:
        if int(d) < 1:
            raise DimensionError("block dimensions must be positive")
        out.append(slice(start, start + int(d)))
        start += int(d)
    return out


def _mat_rows(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    # row-wise M x without BLAS: each row's result does not depend on how many rows are stacked
    return (X[:, None, :] * M).sum(axis=-1)


class DriftField:
    """Base class: a map ``h: R^d -> R^d`` split into blocks ``h^1..h^D``.

    Subclasses implement :meth:`_eval_many` on an ``(m, d)`` array.
    ``lipschitz`` and ``growth`` (the ``K`` in ``|h(x)| <= K(1 + |x|)``) are
    declared metadata, checked only by sampling.
    """

    blocks: tuple[int, ...]
    lipschitz: float | None = None
    growth: float | None = None
    limit: "DriftField | None" = None  # analytic h_infinity, when known

    def __init__(self, blocks, lipschitz=None, growth=None, limit=None):
        self.blocks = tuple(int(b) for b in blocks)
        self.slices = block_slices(self.blocks)
        self.lipschitz = lipschitz
        self.growth = growth
        self.limit = limit

    @property
    def dim(self) -> int:
        return sum(self.blocks)

    @property
    def D(self) -> int:
        return len(self.blocks)

    def _eval_many(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {x.shape[-1]}")
        return x

    def __call__(self, x) -> np.ndarray:
        x = self._check(x)
        return self._eval_many(x.reshape(1, -1))[0]

    def eval_many(self, X) -> np.ndarray:
        X = self._check(X)
        return self._eval_many(X.reshape(-1, self.dim))

    def block(self, i: int, x) -> np.ndarray:
        """``h^i(x)``, with blocks numbered from 1."""
        if not 1 <= i <= self.D:
            raise DimensionError(f"block index {i} outside 1..{self.D}")
        return self(x)[self.slices[i - 1]]

    def scaled(self, c: float) -> "DriftField":
        """``h_c(x) = h(c x)/c``."""
        return ScaledField(self, c)

    # spot checks -------------------------------------------------------------

    def check_lipschitz(self, rng: np.random.Generator, samples: int = 200, radius: float = 10.0, L=None) -> float:
        """Largest observed ratio ``|h(x)-h(y)| / |x-y|`` over random pairs; compare with ``L``."""
        X = rng.uniform(-radius, radius, size=(samples, self.dim))
        Y = rng.uniform(-radius, radius, size=(samples, self.dim))
        num = np.linalg.norm(self.eval_many(X) - self.eval_many(Y), axis=1)
        den = np.linalg.norm(X - Y, axis=1)
        return float(np.max(num / den))

    def check_growth(self, rng: np.random.Generator, samples: int = 200, radius: float = 100.0) -> float:
        """Largest observed ``|h(x)| / (1 + |x|)``."""
        X = rng.uniform(-radius, radius, size=(samples, self.dim))
        return float(np.max(np.linalg.norm(self.eval_many(X), axis=1) / (1.0 + np.linalg.norm(X, axis=1))))


class LinearField(DriftField):
    """``h(x) = M x``."""

    def __init__(self, M, blocks=None):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        d = self.M.shape[0]
        if self.M.shape != (d, d):
            raise DimensionError("matrix must be square")
        L = float(np.linalg.norm(self.M, 2))
        super().__init__(blocks or (d,), lipschitz=L, growth=L)
        if self.dim != d:
            raise DimensionError("blocks do not add up to the matrix size")
        self.limit = self

    def _eval_many(self, X):
        return _mat_rows(X, self.M)

    def scaled(self, c):
        if c < 1:
            raise ParameterError("scaling factor c must be >= 1")
        return self


class AffineField(DriftField):
    """``h(x) = M x + v``; the offset vanishes under scaling."""

    def __init__(self, M, v, blocks=None):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        self.v = np.atleast_1d(np.asarray(v, dtype=float))
        d = self.M.shape[0]
        if self.M.shape != (d, d) or self.v.shape != (d,):
            raise DimensionError("inconsistent matrix/offset shapes")
        L = float(np.linalg.norm(self.M, 2))
        super().__init__(blocks or (d,), lipschitz=L, growth=max(L, float(np.linalg.norm(self.v))))
        self.limit = LinearField(self.M, self.blocks)

    def _eval_many(self, X):
        return _mat_rows(X, self.M) + self.v


class CallableField(DriftField):
    """Wraps ``fn(x) -> h(x)`` for a single point (rows are evaluated one at a time)."""

    def __init__(self, fn: Callable, blocks, lipschitz=None, growth=None, limit=None, vectorized=False):
        super().__init__(blocks, lipschitz, growth, limit)
        self.fn = fn
        self.vectorized = vectorized

    def _eval_many(self, X):
        if self.vectorized:
            return np.asarray(self.fn(X), dtype=float).reshape(X.shape)
        return np.array([np.asarray(self.fn(x), dtype=float) for x in X]).reshape(X.shape)


class ScaledField(DriftField):
    def __init__(self, base: DriftField, c: float):
        if c < 1:
            raise ParameterError("scaling factor c must be >= 1")
        super().__init__(base.blocks, base.lipschitz, base.growth, base.limit)
        self.base, self.c = base, float(c)

    def _eval_many(self, X):
        if self.c == 1.0:
            return self.base._eval_many(X)
        return self.base._eval_many(self.c * X) / self.c


class TableField(DriftField):
    """1-d drift from a grid by linear interpolation, extended linearly past both ends."""

    def __init__(self, grid, values):
        g = np.asarray(grid, dtype=float)
        v = np.asarray(values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or len(g) < 2 or np.any(np.diff(g) <= 0):
            raise DimensionError("grid must be strictly increasing with matching values (>= 2 points)")
        self.grid, self.values = g, v
        slopes = np.diff(v) / np.diff(g)
        L = float(np.max(np.abs(slopes)))
        super().__init__((1,), lipschitz=L)
        self.left_slope, self.right_slope = float(slopes[0]), float(slopes[-1])

    def _eval_many(self, X):
        x = X[:, 0]
        y = np.interp(x, self.grid, self.values)
        y = np.where(x < self.grid[0], self.values[0] + self.left_slope * (x - self.grid[0]), y)
        y = np.where(x > self.grid[-1], self.values[-1] + self.right_slope * (x - self.grid[-1]), y)
        return y[:, None]


class RegularizedField(DriftField):
    """``h(x) = g(x) - 2 kappa x``: the drift of ``G(x) + kappa |x|^2`` when ``g = -grad G``."""

    def __init__(self, base: DriftField, kappa: float = 0.0):
        if kappa < 0:
            raise ParameterError("kappa must be non-negative")
        L = None if base.lipschitz is None else base.lipschitz + 2 * kappa
        super().__init__(base.blocks, L)
        self.base, self.kappa = base, float(kappa)

    def _eval_many(self, X):
        return self.base._eval_many(X) - 2.0 * self.kappa * X


def regularize(base: DriftField, kappa: float = 0.0) -> RegularizedField:
    return RegularizedField(base, kappa)


# --------------------------------------------------------------------------
# module-level operations


def eval_drift(field: DriftField, x) -> np.ndarray:
    return field(x)


def eval_block(field: DriftField, i: int, x) -> np.ndarray:
    return field.block(i, x)


def scaled_drift(field: DriftField, c: float, x) -> np.ndarray:
    if c < 1:
        raise ParameterError("scaling factor c must be >= 1")
    x = np.asarray(x, dtype=float)
    if c == 1:
        return field(x)
    return field(c * x) / c


@dataclass
class LimitProbe:
    scales: np.ndarray
    values: np.ndarray  # (len(scales), d)
    increments: np.ndarray
    converged: bool

    @property
    def limit(self) -> np.ndarray:
        return self.values[-1]


def limit_drift_probe(field: DriftField, x, scales, tol: float = 1e-6) -> LimitProbe:
    """Evaluate ``h_c(x)`` along increasing ``c`` and apply a Cauchy test to the last increment.

    A diagnostic only: convergence on a finite ladder proves nothing.
    """
    c = np.asarray(scales, dtype=float)
    if len(c) < 2 or c[0] < 1 or np.any(np.diff(c) <= 0):
        raise ParameterError("scales must be strictly increasing with c_1 >= 1")
    vals = np.array([scaled_drift(field, ck, x) for ck in c])
    inc = np.linalg.norm(np.diff(vals, axis=0), axis=1)
    return LimitProbe(c, vals, inc, bool(inc[-1] < tol))


# --------------------------------------------------------------------------
# noise


NOISE_KINDS = ("zero", "gaussian-scaled", "bounded-uniform")


@dataclass(frozen=True)
class NoiseModel:
    """Sign-symmetric noise whose per-coordinate variance is ``K^2 (1 + |z|^2)``.

    ``z`` is the delayed argument vector of the agent owning the coordinate.
    ``bounded-uniform`` draws ``U[-1, 1] * sqrt(3)`` so the variance matches.
    """

    kind: str = "zero"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ParameterError("noise scale must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.scale == 0.0

    def base_draws(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Unit-variance, zero-mean draws later multiplied by the state-dependent scale."""
        if self.kind == "gaussian-scaled":
            return rng.standard_normal(shape)
        if self.kind == "bounded-uniform":
            return rng.uniform(-1.0, 1.0, shape) * np.sqrt(3.0)
        return np.zeros(shape)

    def amplitude(self, znorm2) -> np.ndarray:
        return self.scale * np.sqrt(1.0 + np.asarray(znorm2, dtype=float))


def sample_noise(model: NoiseModel, rng: np.random.Generator, arg) -> np.ndarray:
    arg = np.asarray(arg, dtype=float)
    if model.is_zero:
        return np.zeros_like(arg)
    return model.amplitude(arg @ arg) * model.base_draws(rng, arg.shape)


# --------------------------------------------------------------------------
# stochastic objectives


@dataclass
class QuadraticObjective:
    """``f(x; xi) = x^T A(xi) x + b(xi)^T x`` with independent finite-support laws for ``A`` and ``b``.

    Sample gradient ``(A + A^T) x + b``; mean drift ``h(x) = -((EA + EA^T) x + Eb)``.
    """

    A_support: np.ndarray  # (kA, d, d)
    b_support: np.ndarray  # (kb, d)
    A_probs: np.ndarray | None = None
    b_probs: np.ndarray | None = None
    blocks: tuple[int, ...] | None = None
    _S: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A_support, dtype=float)
        if A.ndim == 2:
            A = A[None]
        if A.ndim == 1:  # scalar support for d = 1
            A = A.reshape(-1, 1, 1)
        b = np.asarray(self.b_support, dtype=float)
        d = A.shape[1]
        if A.shape[1:] != (d, d):
            raise DimensionError("A support must be square matrices")
        if b.ndim == 1:
            b = b.reshape(-1, 1) if d == 1 else b[None]
        if b.shape[1] != d:
            raise DimensionError("b support has wrong dimension")
        self.A_support, self.b_support = A, b
        self.A_probs = self._probs(self.A_probs, len(A))
        self.b_probs = self._probs(self.b_probs, len(b))
        self.blocks = tuple(self.blocks) if self.blocks else (d,)
        if sum(self.blocks) != d:
            raise DimensionError("blocks do not add up to the dimension")
        self._S = A + np.transpose(A, (0, 2, 1))

    @staticmethod
    def _probs(p, k):
        if p is None:
            return np.full(k, 1.0 / k)
        p = np.asarray(p, dtype=float)
        if p.shape != (k,) or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ParameterError("probabilities must be non-negative, one per support point, summing to 1")
        return p

    @property
    def dim(self) -> int:
        return self.A_support.shape[1]

    @property
    def mean_A(self) -> np.ndarray:
        return np.tensordot(self.A_probs, self.A_support, axes=1)

    @property
    def mean_b(self) -> np.ndarray:
        return self.b_probs @ self.b_support

    @property
    def mean_hessian(self) -> np.ndarray:
        EA = self.mean_A
        return EA + EA.T

    def F(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.mean_A @ x + self.mean_b @ x)

    def gradient(self, x, a_idx: int, b_idx: int) -> np.ndarray:
        return self._S[a_idx] @ np.asarray(x, dtype=float) + self.b_support[b_idx]

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.mean_hessian, -self.mean_b)

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.mean_hessian)))

    def drift(self) -> AffineField:
        """``h = -grad F``; ``h_inf(x) = -(EA + EA^T) x``."""
        return AffineField(-self.mean_hessian, -self.mean_b, self.blocks)

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices of ``n`` i.i.d. samples ``xi`` (one for ``A``, one for ``b``)."""
        a_idx = rng.choice(len(self.A_support), size=n, p=self.A_probs)
        b_idx = rng.choice(len(self.b_support), size=n, p=self.b_probs)
        return a_idx, b_idx


def sgd_sample_drift(objective: QuadraticObjective, i: int, delayed, rng: np.random.Generator) -> np.ndarray:
    """``-grad_{x_i} f(z; xi)`` for one fresh sample ``xi``; blocks numbered from 1."""
    a_idx, b_idx = objective.draw(rng, 1)
    g = objective.gradient(delayed, int(a_idx[0]), int(b_idx[0]))
    return -g[block_slices(objective.blocks)[i - 1]]
