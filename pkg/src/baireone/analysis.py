"""Variation, absolute-continuity modulus, Lipschitz estimates and certificates.

Grid quantities here are lower bounds on the true ones (they are realized by
an explicit collection of intervals); certificates built from certified
Lipschitz data supply the matching upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .funcspace import LipschitzMap, NormedTarget, VariationReport, as_points, norm

__all__ = [
    "ACCertificate",
    "TwoSidedCertificate",
    "BlendCheck",
    "POINTS_PER_UNIT",
    "MAX_POINTS",
    "default_grid",
    "variation",
    "ac_modulus",
    "lipschitz_estimate",
    "check_blend_constant",
    "piecewise_ac_certificate",
    "pseudo_norm_obstruction",
]

POINTS_PER_UNIT = 10_000
MAX_POINTS = 10_000_000

_SCALAR = NormedTarget(1, "L2")


def default_grid(lo, hi, points=None, extra=None) -> np.ndarray:
    """Uniform grid on ``[lo, hi]`` merged with any ``extra`` points inside it."""
    if points is None:
        points = min(MAX_POINTS, max(2, int(math.ceil(POINTS_PER_UNIT * (hi - lo))) + 1))
    xs = np.linspace(lo, hi, int(points))
    if extra is not None:
        extra = as_points(extra)
        extra = extra[(extra >= lo) & (extra <= hi)]
        xs = np.unique(np.concatenate([xs, extra]))
    return xs


def _grid(I, grid):
    lo, hi = map(float, I)
    if isinstance(grid, np.ndarray):
        return np.unique(grid[(grid >= lo) & (grid <= hi)])
    return default_grid(lo, hi, grid)


def _values(f, xs, target):
    fx = np.asarray(f(xs), dtype=float)
    if fx.ndim == 1:
        fx = fx[:, None]
    return fx


def variation(f, I, points=None, target: NormedTarget = _SCALAR, deltas=None) -> VariationReport:
    """Sum of increment norms over a uniform partition of ``I``.

    >>> round(variation(np.sin, (0, 2 * np.pi), 10**5).total, 6)
    4.0
    """
    if points is not None and not isinstance(points, np.ndarray) and points < 2:
        raise ValueError("need at least two partition points")
    xs = _grid(I, points)
    fx = _values(f, xs, target)
    inc = norm(target, np.diff(fx, axis=0))
    total = float(inc.sum())
    length = xs[-1] - xs[0]
    if deltas is None:
        deltas = [length * 0.1, length * 0.01, length * 0.001]
    table = [(float(d), _modulus_from_increments(f, xs, fx, inc, d, target)) for d in deltas]
    return VariationReport((float(xs[0]), float(xs[-1])), xs, total, table)


def _modulus_from_increments(f, xs, fx, inc, delta, target):
    widths = np.diff(xs)
    budget = delta * (1 - 1e-12)
    if budget >= widths.sum():
        return float(inc.sum())
    density = inc / widths
    order = np.argsort(-density, kind="stable")
    cum = np.cumsum(widths[order])
    whole = int(np.searchsorted(cum, budget, side="right"))
    total = float(inc[order[:whole]].sum())
    used = cum[whole - 1] if whole else 0.0
    rest = budget - used
    if rest > 0 and whole < len(order):
        j = order[whole]
        a, b = xs[j], xs[j + 1]
        ends = np.array([a, a + rest, b - rest, b])
        fe = _values(f, ends, target)
        part = max(float(norm(target, fe[1] - fe[0])), float(norm(target, fe[3] - fe[2])))
        total += part
    return total


def ac_modulus(f, I, delta: float, grid=None, target: NormedTarget = _SCALAR) -> float:
    """Largest increment sum over disjoint grid-aligned collections of length < delta.

    Cells are taken greedily by increment per unit length (the fractional
    knapsack order); the leftover budget is spent on one sub-interval at an end
    of the next cell.  The returned value is realized by an explicit
    collection, so it never exceeds the true modulus.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    xs = _grid(I, grid)
    fx = _values(f, xs, target)
    inc = norm(target, np.diff(fx, axis=0))
    return _modulus_from_increments(f, xs, fx, inc, delta, target)


def lipschitz_estimate(f, I, grid=None, target: NormedTarget = _SCALAR) -> float:
    """Largest chord slope between consecutive grid points."""
    if grid is not None and not isinstance(grid, np.ndarray) and grid < 2:
        raise ValueError("need at least two grid points")
    xs = _grid(I, grid)
    fx = _values(f, xs, target)
    return float(np.max(norm(target, np.diff(fx, axis=0)) / np.diff(xs)))


@dataclass(frozen=True)
class BlendCheck:
    passed: bool
    measured: float
    bound: float
    K: float
    L: float
    M: float


def check_blend_constant(g: LipschitzMap, h: LipschitzMap, phi: LipschitzMap,
                         M: Optional[float] = None, I=None, grid=None,
                         rel: float = 1e-6) -> BlendCheck:
    """Measure the Lipschitz constant of ``phi*g + (1-phi)*h`` against ``K + L*M``."""
    if I is None:
        I = g.domain.inner_segment()
    lo, hi = map(float, I)
    extra = [np.array([lo, hi])]
    for m in (g, h, phi):
        if m.is_piecewise_linear:
            extra.append(m.knots)
    xs = default_grid(lo, hi, grid, np.concatenate(extra))
    ph = phi(xs)[:, 0]
    if ph.min() < 0 or ph.max() > 1:
        raise ValueError("phi must take values in [0, 1]")
    gv, hv = g(xs), h(xs)
    if M is None:
        M = float(norm(g.target, gv - hv).max())
    K = max(g.constant, h.constant)
    L = phi.constant
    blend = ph[:, None] * gv + (1 - ph[:, None]) * hv
    measured = float(np.max(norm(g.target, np.diff(blend, axis=0)) / np.diff(xs)))
    bound = K + L * M
    return BlendCheck(measured <= bound * (1 + rel), measured, bound, K, L, float(M))


@dataclass(frozen=True)
class ACCertificate:
    """Absolute continuity from piecewise Lipschitz data.

    The map is Lipschitz with ``constants[n]`` on
    ``[breakpoints[n], breakpoints[n+1]]``; ``residual`` bounds whatever lies
    past the last breakpoint (the unfinished part of an infinite sequence).
    """

    breakpoints: np.ndarray = field(repr=False)
    constants: np.ndarray = field(repr=False)
    residual: float = 0.0

    @property
    def pieces(self) -> np.ndarray:
        return self.constants * np.diff(self.breakpoints)

    @property
    def tail(self) -> float:
        return float(self.pieces.sum() + self.residual)

    def tail_from(self, m: int) -> float:
        """``sum_{n >= m} C_n (a_{n+1} - a_n)`` plus the residual, pieces counted from 1."""
        return float(self.pieces[max(m, 1) - 1:].sum() + self.residual)

    def delta_for_eps(self, eps: float) -> Optional[tuple]:
        """``(delta, m)`` with ``delta = eps / (2 max_{n <= m} C_n)`` where the tail past m is < eps/2.

        Returns None when even the residual alone is too large.
        """
        if not eps > 0:
            raise ValueError("eps must be positive")
        pieces = self.pieces
        # beyond[m] = sum_{n > m} pieces + residual, for m = 0..P
        beyond = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + self.residual
        ok = np.flatnonzero(beyond < eps / 2)
        if len(ok) == 0:
            return None
        m = int(ok[0])
        span = float(self.breakpoints[-1] - self.breakpoints[0])
        cmax = float(self.constants[:m].max()) if m else 0.0
        if cmax == 0.0:
            return span, m
        return min(span, eps / (2 * cmax)), m

    def to_dict(self):
        return {
            "breakpoints": [float(v) for v in self.breakpoints],
            "constants": [float(v) for v in self.constants],
            "residual": float(self.residual),
            "tail": self.tail,
        }


def piecewise_ac_certificate(breakpoints, constants, residual: float = 0.0) -> ACCertificate:
    a = np.asarray(breakpoints, dtype=float)
    C = np.asarray(constants, dtype=float)
    if len(a) < 2 or np.any(np.diff(a) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    if len(C) != len(a) - 1:
        raise ValueError("need one constant per piece")
    if np.any(C < 0) or not np.all(np.isfinite(C)):
        raise ValueError("constants must be finite and nonnegative")
    if not residual >= 0:
        raise ValueError("residual must be nonnegative")
    return ACCertificate(a, C, float(residual))


@dataclass(frozen=True)
class TwoSidedCertificate:
    """Certificates for the two halves of a map split at ``center``.

    An interval straddling the split is cut there, so an increment sum is at
    most the sum of the one-sided bounds; each side therefore gets half of eps.
    """

    center: float
    left: Optional[ACCertificate]
    right: Optional[ACCertificate]

    @property
    def tail(self) -> float:
        return sum(c.tail for c in (self.left, self.right) if c is not None)

    def delta_for_eps(self, eps: float) -> Optional[float]:
        deltas = []
        for side in (self.left, self.right):
            if side is None:
                continue
            got = side.delta_for_eps(eps / 2)
            if got is None:
                return None
            deltas.append(got[0])
        return min(deltas) if deltas else math.inf

    def to_dict(self):
        return {
            "center": float(self.center),
            "left": None if self.left is None else self.left.to_dict(),
            "right": None if self.right is None else self.right.to_dict(),
            "tail": self.tail,
        }


def pseudo_norm_obstruction(p: float, scales) -> list:
    """Two-point Lipschitz ratios ``|h|^p / h`` of the identity into (R, |.|^p)."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    target = NormedTarget(1, "PseudoP", p)
    rows = []
    for h in scales:
        if not h > 0:
            raise ValueError("scales must be positive")
        ratio = float(norm(target, np.array([h]))) / h
        rows.append({"h": float(h), "ratio": ratio, "h_pow_p_minus_1": float(h ** (p - 1))})
    return rows
