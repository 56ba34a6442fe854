"""Core types: intervals, normed targets, Lipschitz maps and Baire series.

Every evaluator in the package is vectorized: it takes a 1-D float array of
``m`` points and returns an ``(m, d)`` array of target vectors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import OutsideDomainError

__all__ = [
    "Interval",
    "NormedTarget",
    "LipschitzMap",
    "BaireSeries",
    "SeriesValue",
    "VariationReport",
    "norm",
    "sum_series",
    "constant_series",
    "as_points",
]

Evaluator = Callable[[np.ndarray], np.ndarray]

# grid-estimation resolution shared by modules that sample maps
SAMPLES_PER_UNIT = 4096


def as_points(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"degenerate interval: lo={self.lo} hi={self.hi}")
        if math.isinf(self.lo) and self.closed_lo:
            object.__setattr__(self, "closed_lo", False)
        if math.isinf(self.hi) and self.closed_hi:
            object.__setattr__(self, "closed_hi", False)

    _SPEC = re.compile(r"^\s*([\[(])\s*([^,]+?)\s*,\s*([^,]+?)\s*([\])])\s*$")

    @classmethod
    def parse(cls, text: str) -> "Interval":
        """Read ``"[0, 1]"``, ``"(0, 1]"``, ``"(-inf, inf)"`` and the like."""
        m = cls._SPEC.match(text)
        if m is None:
            raise ValueError(f"bad interval spec {text!r}")
        left, lo, hi, right = m.groups()
        return cls(float(lo), float(hi), left == "[", right == "]")

    def __str__(self):
        return f"{'[' if self.closed_lo else '('}{self.lo!r}, {self.hi!r}{']' if self.closed_hi else ')'}"

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def compact(self) -> bool:
        return self.bounded and self.closed_lo and self.closed_hi

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left = x >= self.lo if self.closed_lo else x > self.lo
        right = x <= self.hi if self.closed_hi else x < self.hi
        return left & right

    def check(self, x, what="point"):
        inside = self.contains(x)
        if not np.all(inside):
            bad = np.asarray(x, dtype=float).ravel()[~inside.ravel()][0]
            raise OutsideDomainError(f"{what} {bad!r} is outside {self}")

    def inner_segment(self, frac: float = 0.0) -> tuple:
        """A compact segment inside the interval, nudged off open ends."""
        lo, hi = self.lo, self.hi
        if not self.bounded:
            raise ValueError("unbounded interval has no canonical inner segment")
        pad = frac * (hi - lo)
        if not self.closed_lo:
            lo = lo + max(pad, 8 * np.spacing(abs(lo) + (hi - lo)))
        if not self.closed_hi:
            hi = hi - max(pad, 8 * np.spacing(abs(hi) + (hi - lo)))
        return lo, hi

    def to_dict(self):
        return {"lo": _json_real(self.lo), "hi": _json_real(self.hi),
                "closed_lo": self.closed_lo, "closed_hi": self.closed_hi}


def _json_real(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


NORM_KINDS = ("L1", "L2", "Linf", "PseudoP")


@dataclass(frozen=True)
class NormedTarget:
    """The codomain: R^dim with an L1/L2/Linf norm, or R with |t|^p."""

    dim: int = 1
    kind: str = "L2"
    p: Optional[float] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "PseudoP":
            if self.dim != 1:
                raise ValueError("the |t|^p pseudo-norm is scalar only")
            if self.p is None or not 0 < self.p < 1:
                raise ValueError("PseudoP needs 0 < p < 1")

    @property
    def is_norm(self) -> bool:
        return self.kind != "PseudoP"

    def __call__(self, v) -> np.ndarray:
        return norm(self, v)

    def to_dict(self):
        out = {"dim": self.dim, "kind": self.kind}
        if self.p is not None:
            out["p"] = self.p
        return out


def norm(t: NormedTarget, v) -> np.ndarray:
    """Norm of vectors along the last axis; a bare scalar is allowed for dim 1.

    >>> float(norm(NormedTarget(2, "L2"), [3.0, 4.0]))
    5.0
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = v[None]
    if v.shape[-1] != t.dim:
        raise ValueError(f"dimension mismatch: expected {t.dim}, got {v.shape[-1]}")
    a = np.abs(v)
    if t.kind == "L1":
        return a.sum(axis=-1)
    if t.kind == "Linf":
        return a.max(axis=-1)
    if t.kind == "L2":
        if t.dim == 1:
            return a[..., 0]
        return np.sqrt(np.sum(a * a, axis=-1))
    return a[..., 0] ** t.p


@dataclass(frozen=True)
class LipschitzMap:
    """A map on ``domain`` with a Lipschitz constant.

    Piecewise-linear maps carry their ``knots`` and ``values``; their constant is
    exact and they extend constantly past the outer knots.
    """

    domain: Interval
    target: NormedTarget
    evaluator: Evaluator
    constant: float
    constant_kind: str = "certified"  # or "grid-estimated"
    knots: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(as_points(x))

    @classmethod
    def piecewise_linear(cls, domain, target, knots, values) -> "LipschitzMap":
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float).reshape(len(knots), target.dim)
        if len(knots) > 1 and np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        const = _pl_constant(target, knots, values)

        def evaluator(x, _k=knots, _v=values):
            x = as_points(x)
            if len(_k) == 1:
                return np.repeat(_v, len(x), axis=0)
            return np.stack([np.interp(x, _k, _v[:, j]) for j in range(_v.shape[1])], axis=-1)

        return cls(domain, target, evaluator, const, "certified", knots, values)

    @property
    def is_piecewise_linear(self) -> bool:
        return self.knots is not None

    def constant_on(self, lo: float, hi: float, grid: Optional[int] = None) -> tuple:
        """Lipschitz constant on ``[lo, hi]`` and its kind."""
        if self.is_piecewise_linear:
            k, v = _restrict_knots(self, lo, hi)
            return _pl_constant(self.target, k, v), "certified"
        n = grid or max(2, int(SAMPLES_PER_UNIT * (hi - lo)) + 1)
        xs = np.linspace(lo, hi, n)
        fx = self(xs)
        est = float(np.max(norm(self.target, np.diff(fx, axis=0)) / np.diff(xs)))
        if self.constant_kind == "certified" and self.constant <= est:
            return self.constant, "certified"
        return est, "grid-estimated"

    def restricted_knots(self, lo, hi):
        return _restrict_knots(self, lo, hi)


def _pl_constant(target, knots, values):
    if len(knots) < 2:
        return 0.0
    slopes = norm(target, np.diff(values, axis=0)) / np.diff(knots)
    return float(slopes.max())


def _restrict_knots(m: LipschitzMap, lo, hi):
    k = m.knots
    inner = (k > lo) & (k < hi)
    xs = np.concatenate(([lo], k[inner], [hi]))
    vals = m(xs)
    if hi == lo:
        return xs[:1], vals[:1]
    return xs, vals


@dataclass(frozen=True)
class SeriesValue:
    value: np.ndarray  # (m, d)
    index: np.ndarray  # stage used per point
    residual: np.ndarray  # bound on distance to the limit per point


@dataclass(frozen=True)
class BaireSeries:
    """A sequence of continuous stages converging with summable increments.

    ``tail_bound(n, x)`` bounds ``sum_{m >= n} |g_{m+1}(x) - g_m(x)|``, hence the
    distance from stage ``n`` to the limit at ``x``.
    """

    domain: Interval
    target: NormedTarget
    stage: Callable[[int], Evaluator]
    truncation: int
    tail_bound: Callable[[int, np.ndarray], np.ndarray]
    name: str = ""
    limit: Optional[Evaluator] = None

    def __post_init__(self):
        if self.truncation < 1:
            raise ValueError("truncation must be at least 1")

    def tail(self, n: int, x) -> np.ndarray:
        x = as_points(x)
        return np.broadcast_to(np.asarray(self.tail_bound(n, x), dtype=float), x.shape)

    def increment_sums(self, x, upto: Optional[int] = None) -> np.ndarray:
        """Partial sums of increment norms: row n-1 holds sum_{k<n} |g_{k+1}-g_k|."""
        x = as_points(x)
        upto = upto or self.truncation
        prev = self.stage(1)(x)
        total = np.zeros(len(x))
        rows = [total.copy()]
        for n in range(2, upto + 1):
            cur = self.stage(n)(x)
            total = total + norm(self.target, cur - prev)
            rows.append(total.copy())
            prev = cur
        return np.array(rows)


def constant_series(domain, target, fn: Evaluator, name="", truncation=1) -> BaireSeries:
    """Series whose stages all equal ``fn``."""
    return BaireSeries(domain, target, lambda n: fn, truncation,
                       lambda n, x: np.zeros(len(x)), name, fn)


def sum_series(s: BaireSeries, x, tol: float) -> SeriesValue:
    """Evaluate the limit of ``s`` at ``x`` to within ``tol`` where the tail allows.

    Uses the smallest stage ``N <= truncation`` whose tail bound is ``<= tol``;
    points where no such stage exists get the last stage and its residual.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = as_points(x)
    s.domain.check(x)
    top = s.truncation
    last_tail = s.tail(top, x)
    ok = last_tail <= tol
    idx = np.full(len(x), top, dtype=int)
    # tails are nonincreasing in n, so bisect each point's first stage under tol
    if ok.any():
        lo = np.ones(int(ok.sum()), dtype=int)
        hi = np.full_like(lo, top)
        xs = x[ok]
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            under = np.zeros(len(xs), dtype=bool)
            for m in np.unique(mid[lo < hi]):
                sel = (mid == m) & (lo < hi)
                under[sel] = s.tail(int(m), xs[sel]) <= tol
            active = lo < hi
            hi = np.where(active & under, mid, hi)
            lo = np.where(active & ~under, mid + 1, lo)
        idx[ok] = lo
    value = np.empty((len(x), s.target.dim))
    residual = np.empty(len(x))
    for n in np.unique(idx):
        sel = idx == n
        value[sel] = s.stage(int(n))(x[sel])
        residual[sel] = s.tail(int(n), x[sel])
    return SeriesValue(value, idx, residual)


@dataclass(frozen=True)
class VariationReport:
    interval: tuple
    partition: np.ndarray = field(repr=False)
    total: float
    modulus_table: list

    def to_dict(self):
        return {
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "points": int(len(self.partition)),
            "total": float(self.total),
            "modulus_table": [{"delta": float(d), "sup_sum": float(v)} for d, v in self.modulus_table],
        }


class ExpressionMap:
    """Vector-valued evaluator built from one expression per coordinate.

    ``overrides`` pins values at isolated points, e.g. ``{0.0: 0.0}`` to fill
    the removable singularity of ``x*sin(1/x)``.
    """

    def __init__(self, exprs, overrides=None):
        self.exprs = tuple(exprs)
        if not self.exprs:
            raise ValueError("need at least one expression")
        self.arity = self.exprs[0].arity
        if any(e.arity != self.arity for e in self.exprs):
            raise ValueError("coordinate expressions must share an arity")
        self.dim = len(self.exprs)
        self.overrides = {}
        for key, val in (overrides or {}).items():
            vec = np.atleast_1d(np.asarray(val, dtype=float))
            if vec.shape != (self.dim,):
                raise ValueError(f"override at {key} has wrong dimension")
            self.overrides[key] = vec

    def __call__(self, x, y=None):
        x = as_points(x)
        if y is not None:
            x, y = np.broadcast_arrays(x, as_points(y))
        out = np.empty((len(x), self.dim))
        free = np.ones(len(x), dtype=bool)
        for key, vec in self.overrides.items():
            if self.arity == 1:
                hit = x == key
            else:
                hit = (x == key[0]) & (y == key[1])
            out[hit] = vec
            free &= ~hit
        if free.any():
            for j, e in enumerate(self.exprs):
                if self.arity == 1:
                    out[free, j] = e(x[free])
                else:
                    out[free, j] = e(x[free], y[free])
        return out
