"""Separately absolutely continuous surfaces with a prescribed diagonal.

Given Lipschitz stages ``g_0 = 0, g_1, ..., g_N`` converging to ``g`` with
summable increments, the surface is

    f(x, y) = 0                                          |x - y| > delta_1
    f(x, y) = phi_n(x-y) g_{n-1}(x) + (1-phi_n(x-y)) g_n(x)   delta_{n+1} <= |x-y| <= delta_n
    f(x, x) = g(x)

where ``phi_n`` ramps linearly in ``|t|`` from 0 at ``delta_{n+1}`` to 1 at
``delta_n``.  Stages are clamped to the segments of an exhaustion of the
domain, and ``delta_n`` is chosen so that ``sum K_n delta_n`` converges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import ACCertificate, TwoSidedCertificate, piecewise_ac_certificate
from .errors import OutsideDomainError
from .funcspace import (
    BaireSeries,
    Interval,
    LipschitzMap,
    NormedTarget,
    as_points,
    constant_series,
    norm,
    sum_series,
)
from .smoothing import EpsSchedule, mollify_series

__all__ = [
    "Exhaustion",
    "BandScheme",
    "ExtensionSurface",
    "SurfaceValue",
    "clamp_stage",
    "choose_deltas",
    "cutoff",
    "build_surface",
    "eval_surface",
    "section",
]


@dataclass(frozen=True)
class Exhaustion:
    """Increasing compact segments ``I_n = [a_n, b_n]`` whose union is the domain.

    Closed finite ends are kept; open finite ends are approached as
    ``mid -+ (1 - 2^-n) * radius`` (or ``end +- 2^-n`` next to an infinite end);
    infinite ends grow like ``-+n``.
    """

    domain: Interval

    def segment(self, n: int) -> tuple:
        if n < 1:
            raise ValueError("segments are indexed from 1")
        X = self.domain
        shrink = 1.0 - 2.0 ** -n
        if X.bounded:
            mid, rad = 0.5 * (X.lo + X.hi), 0.5 * (X.hi - X.lo)
            a = X.lo if X.closed_lo else mid - shrink * rad
            b = X.hi if X.closed_hi else mid + shrink * rad
            return float(a), float(b)
        if math.isinf(X.lo) and math.isinf(X.hi):
            return float(-n), float(n)
        if math.isinf(X.hi):
            a = X.lo if X.closed_lo else X.lo + 2.0 ** -n
            return float(a), float(max(n, X.lo + n))
        b = X.hi if X.closed_hi else X.hi - 2.0 ** -n
        return float(min(-n, X.hi - n)), float(b)


def clamp_stage(gtilde: LipschitzMap, seg, domain: Optional[Interval] = None) -> LipschitzMap:
    """Freeze ``gtilde`` outside ``seg`` at its endpoint values."""
    domain = domain or gtilde.domain
    a, b = map(float, seg)
    if not a <= b or not (domain.contains(a) and domain.contains(b)):
        raise OutsideDomainError(f"segment [{a}, {b}] is not inside {domain}")
    if gtilde.is_piecewise_linear:
        knots, values = gtilde.restricted_knots(a, b)
        return LipschitzMap.piecewise_linear(domain, gtilde.target, knots, values)
    const, kind = gtilde.constant_on(a, b)

    def evaluator(x, _g=gtilde, _a=a, _b=b):
        return _g(np.clip(as_points(x), _a, _b))

    return LipschitzMap(domain, gtilde.target, evaluator, const, kind)


@dataclass(frozen=True)
class BandScheme:
    """Band widths and the Lipschitz bookkeeping of the blended surface.

    Arrays are 0-based: ``deltas[n-1]`` is delta_n for n = 1..N+1, ``K[n-1]``
    is K_n for n = 1..N+1, and ``sup_diff``, ``M``, ``L``, ``C`` hold n = 1..N.
    ``sup_diff[n-1]`` is the exact sup over the domain of |g_n - g_{n-1}|.
    """

    deltas: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    sup_diff: np.ndarray = field(repr=False)

    @property
    def n_bands(self) -> int:
        return len(self.deltas) - 1

    def delta(self, n: int) -> float:
        return float(self.deltas[n - 1])

    @property
    def L(self) -> np.ndarray:
        return 1.0 / (self.deltas[:-1] - self.deltas[1:])

    @property
    def M(self) -> np.ndarray:
        N = self.n_bands
        return self.sup_diff + 2 * self.K[:N] * self.deltas[:N]

    @property
    def C(self) -> np.ndarray:
        return self.K[: self.n_bands] + self.L * self.M

    @property
    def sum_K_delta(self) -> float:
        N = self.n_bands
        return float(np.sum(self.K[:N] * self.deltas[:N]))

    def tail_from(self, m: int) -> float:
        """``sum_{m <= n <= N} C_n (delta_n - delta_{n+1})``."""
        widths = self.deltas[:-1] - self.deltas[1:]
        return float(np.sum((self.C * widths)[m - 1:]))

    def tail_bound_from(self, m: int) -> float:
        """``3 sum_{n >= m} K_n delta_n + sum_{n >= m} sup|g_n - g_{n-1}|``."""
        N = self.n_bands
        kd = self.K[:N] * self.deltas[:N]
        return float(3 * kd[m - 1:].sum() + self.sup_diff[m - 1:].sum())

    def to_dict(self):
        N = self.n_bands
        bands = []
        for n in range(1, N + 1):
            i = n - 1
            bands.append({
                "n": n,
                "delta": float(self.deltas[i]),
                "K": float(self.K[i]),
                "L": float(self.L[i]),
                "sup_diff": float(self.sup_diff[i]),
                "M": float(self.M[i]),
                "C": float(self.C[i]),
                "tail_from": self.tail_from(n),
                "tail_bound_from": self.tail_bound_from(n),
            })
        return {
            "bands": bands,
            "delta_last": float(self.deltas[-1]),
            "K_last": float(self.K[-1]),
            "sum_K_delta": self.sum_K_delta,
        }


def choose_deltas(K, sup_diff=None) -> BandScheme:
    """``delta_1 = 1/(2 max(1, K_1))``, ``delta_n = min(delta_{n-1}/2, 2^-n / max(1, K_n))``.

    Hence ``sum K_n delta_n <= sum 2^-n <= 1`` and the widths strictly decrease.
    ``K`` holds K_1..K_{N+1}; ``sup_diff`` (default zeros) holds n = 1..N.
    """
    K = np.asarray(K, dtype=float)
    if len(K) < 2:
        raise ValueError("need at least K_1 and K_2")
    if np.any(K < 0) or not np.all(np.isfinite(K)):
        raise ValueError("Lipschitz constants must be finite and nonnegative")
    deltas = np.empty(len(K))
    deltas[0] = 0.5 / max(1.0, K[0])
    for i in range(1, len(K)):
        n = i + 1
        deltas[i] = min(deltas[i - 1] / 2, 2.0 ** -n / max(1.0, K[i]))
    if sup_diff is None:
        sup_diff = np.zeros(len(K) - 1)
    sup_diff = np.asarray(sup_diff, dtype=float)
    if len(sup_diff) != len(K) - 1:
        raise ValueError("sup_diff needs one entry per band")
    return BandScheme(deltas, K, sup_diff)


def cutoff(n: int, t, scheme: BandScheme) -> np.ndarray:
    """``phi_n(t)``: 1 above delta_n, 0 below delta_{n+1}, linear in |t| between."""
    if not 1 <= n <= scheme.n_bands:
        raise ValueError(f"band index {n} outside 1..{scheme.n_bands}")
    hi, lo = scheme.delta(n), scheme.delta(n + 1)
    a = np.abs(np.asarray(t, dtype=float))
    return np.clip((a - lo) / (hi - lo), 0.0, 1.0)


@dataclass(frozen=True)
class SurfaceValue:
    value: np.ndarray  # (m, d)
    band: np.ndarray  # 0 far field, n for band n, N+1 inside delta_{N+1}, -1 on the diagonal
    residual: np.ndarray  # bound on the truncation error per point


@dataclass(frozen=True)
class ExtensionSurface:
    domain: Interval
    target: NormedTarget
    stages: tuple  # g_0 .. g_N, LipschitzMap each
    scheme: BandScheme
    diagonal_source: BaireSeries
    exhaustion: Exhaustion
    eps: tuple  # eps_1 .. eps_N used for mollification
    stage_index: tuple  # source stage behind each g_n
    tol: float = 1e-12

    @property
    def n_max(self) -> int:
        return len(self.stages) - 1

    def stage(self, n: int) -> LipschitzMap:
        return self.stages[n]

    def blend(self, n: int, x, t) -> np.ndarray:
        """Band-n formula at points ``x`` with offsets ``t = x - y``."""
        x = as_points(x)
        phi = cutoff(n, t, self.scheme)
        phi = np.broadcast_to(phi, x.shape)[:, None]
        return phi * self.stages[n - 1](x) + (1 - phi) * self.stages[n](x)

    def truncation_residual(self, x) -> np.ndarray:
        """Bound on |g_N(x) - g(x)|; infinite off the last exhaustion segment."""
        x = as_points(x)
        N = self.n_max
        a, b = self.exhaustion.segment(N)
        bound = self.eps[-1] + self.diagonal_source.tail(self.stage_index[-1], x)
        return np.where((x >= a) & (x <= b), bound, np.inf)

    def evaluate(self, x, y, tol: Optional[float] = None) -> SurfaceValue:
        x, y = np.broadcast_arrays(as_points(x), as_points(y))
        x = np.ascontiguousarray(x)
        y = np.ascontiguousarray(y)
        self.domain.check(x)
        self.domain.check(y)
        tol = self.tol if tol is None else tol
        N = self.n_max
        d = self.scheme.deltas
        out = np.zeros((len(x), self.target.dim))
        residual = np.zeros(len(x))
        t = np.abs(x - y)
        count = len(d) - np.searchsorted(d[::-1], t, side="left")  # #{j : delta_j >= t}
        band = np.where(count > N, N + 1, count)
        band = np.where(t == 0, -1, band)
        inner = band == N + 1
        for n in np.unique(band[(band >= 1) & (band <= N)]):
            sel = band == n
            out[sel] = self.blend(int(n), x[sel], t[sel])
        if inner.any():
            out[inner] = self.stages[N](x[inner])
            residual[inner] = self.truncation_residual(x[inner])
        diag = band == -1
        if diag.any():
            sv = sum_series(self.diagonal_source, x[diag], tol)
            out[diag] = sv.value
            residual[diag] = sv.residual
        return SurfaceValue(out, band, residual)

    def __call__(self, x, y, tol: Optional[float] = None) -> np.ndarray:
        return self.evaluate(x, y, tol).value

    def band_tails(self) -> list:
        return [self.scheme.tail_from(m) for m in range(1, self.n_max + 1)]

    def section(self, fixed: str, x0: float):
        return section(self, fixed, x0)

    def section_certificate(self, fixed: str, x0: float, tol: Optional[float] = None) -> TwoSidedCertificate:
        """Piecewise-Lipschitz certificate for a section through ``x0``.

        Uses the pointwise bound ``M_n(x0) = |g_n(x0) - g_{n-1}(x0)| + 2 K_n delta_n``;
        the jump between ``g_N(x0)`` and the diagonal value enters as a residual.
        ``fixed="y"`` is ``x -> f(x, x0)``, ``fixed="x"`` is ``y -> f(x0, y)``.
        """
        if fixed not in ("x", "y"):
            raise ValueError("fixed must be 'x' or 'y'")
        self.domain.check(x0)
        sch = self.scheme
        N = self.n_max
        x0a = np.array([float(x0)])
        vals = np.array([self.stages[n](x0a)[0] for n in range(N + 1)])
        jumps = norm(self.target, np.diff(vals, axis=0))  # |g_n(x0) - g_{n-1}(x0)|, n = 1..N
        diag = sum_series(self.diagonal_source, x0a, self.tol if tol is None else tol)
        J = float(norm(self.target, vals[N] - diag.value[0]) + diag.residual[0])
        Kn = sch.K[:N]
        if fixed == "y":
            consts = Kn + sch.L * (jumps + 2 * Kn * sch.deltas[:N])
            inner = float(self.stages[N].constant)
        else:
            consts = sch.L * jumps
            inner = 0.0
        dist = sch.deltas  # delta_1 .. delta_{N+1}
        c_all = np.concatenate([[0.0], consts, [inner]])
        x0 = float(x0)
        left = _side_certificate(x0 - dist, x0, c_all, self.domain.lo, J)
        right = _side_certificate(-(x0 + dist), -x0, c_all, -self.domain.hi, J)
        return TwoSidedCertificate(x0, left, right)


def _side_certificate(pts, center, c_all, bound, residual) -> Optional[ACCertificate]:
    """Certificate on one side of ``center``, in a coordinate increasing toward it.

    ``pts`` are band edges ordered outward-in; ``c_all`` holds the far-field
    constant, the band constants and the innermost constant.
    """
    if not bound < center:
        return None
    lo = bound if math.isfinite(bound) else pts[0] - 1.0
    edges = np.concatenate([[-np.inf], pts, [center]])
    keep = edges[1:] > lo
    left_ends = np.maximum(edges[:-1][keep], lo)
    right_ends = edges[1:][keep]
    breaks = np.concatenate([left_ends[:1], right_ends])
    consts = c_all[keep]
    good = np.diff(breaks) > 0
    if not good.all():
        breaks = np.concatenate([breaks[:1], breaks[1:][good]])
        consts = consts[good]
    return piecewise_ac_certificate(breaks, consts, residual)


def eval_surface(s: ExtensionSurface, x, y, tol: Optional[float] = None) -> SurfaceValue:
    return s.evaluate(x, y, tol)


def section(s: ExtensionSurface, fixed: str, x0: float):
    """One-variable map through ``x0``: ``fixed="y"`` gives x -> f(x, x0)."""
    if fixed not in ("x", "y"):
        raise ValueError("fixed must be 'x' or 'y'")
    s.domain.check(x0)
    x0 = float(x0)

    if fixed == "y":
        def f(x):
            x = as_points(x)
            return s(x, np.full(len(x), x0))
    else:
        def f(y):
            y = as_points(y)
            return s(np.full(len(y), x0), y)
    return f


def _sup_diff(a: LipschitzMap, b: LipschitzMap, seg) -> float:
    """Exact sup of |a - b| for piecewise-linear maps frozen outside ``seg``."""
    lo, hi = seg
    pts = [np.array([lo, hi])]
    for m in (a, b):
        if m.is_piecewise_linear:
            pts.append(m.knots[(m.knots >= lo) & (m.knots <= hi)])
    xs = np.unique(np.concatenate(pts))
    if not (a.is_piecewise_linear and b.is_piecewise_linear):
        xs = np.unique(np.concatenate([xs, np.linspace(lo, hi, 4097)]))
    return float(norm(a.target, a(xs) - b(xs)).max())


def build_surface(g, domain: Interval, target: NormedTarget, n_max: int = 20,
                  eps_schedule: Optional[EpsSchedule] = None, stage_index=None,
                  tol: float = 1e-12) -> ExtensionSurface:
    """Build the surface for ``g``: a BaireSeries, or a continuous evaluator."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if not target.is_norm:
        raise ValueError("the construction needs a normed target, not a pseudo-norm")
    schedule = eps_schedule or EpsSchedule()
    if isinstance(g, BaireSeries):
        source = g
    else:
        source = constant_series(domain, target, g, "g")
    exhaustion = Exhaustion(domain)
    k_of = stage_index or (lambda n: n)
    moll = mollify_series(source, schedule, exhaustion.segment, k_of, n_max)
    zero = LipschitzMap.piecewise_linear(domain, target, [exhaustion.segment(1)[0]],
                                         np.zeros((1, target.dim)))
    stages = [zero]
    for n in range(1, n_max + 1):
        stages.append(clamp_stage(moll.stage(n), exhaustion.segment(n), domain))
    lips = np.array([st.constant for st in stages])
    K = np.empty(n_max + 1)
    K[:n_max] = np.maximum(lips[:-1], lips[1:])
    K[n_max] = lips[n_max]
    sup_diff = np.array([
        _sup_diff(stages[n], stages[n - 1], exhaustion.segment(n)) for n in range(1, n_max + 1)
    ])
    scheme = choose_deltas(K, sup_diff)
    return ExtensionSurface(
        domain, target, tuple(stages), scheme, source, exhaustion,
        tuple(schedule(n) for n in range(1, n_max + 1)),
        tuple(int(k_of(n)) for n in range(1, n_max + 1)), tol,
    )
