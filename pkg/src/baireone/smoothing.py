"""Lipschitz approximation of a continuous map by a partition of unity.

The interval is bisected until every cell, padded by a quarter of its width on
each side, shows a sampled oscillation below ``eps / 2``.  Each breakpoint
``c_k`` then gets an overlap radius ``r_k = min(w_{k-1}, w_k) / 4`` and the
cells become ``U_k = (c_k - r_k, c_{k+1} + r_{k+1})`` (closed at the ends of
the segment).  With ``psi_U`` the distance to the complement of ``U`` and
``phi_U = psi_U / sum_V psi_V`` the approximation is
``g(x) = sum_U phi_U(x) f(mid U)``.

Neighbouring overlaps never meet, so every point lies in at most two cells
and ``g`` is piecewise linear with knots at ``c_k +- r_k``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import MollificationError
from .funcspace import (
    SAMPLES_PER_UNIT,
    BaireSeries,
    Interval,
    LipschitzMap,
    NormedTarget,
    as_points,
    norm,
)

__all__ = ["MollifierCover", "EpsSchedule", "build_cover", "lipschitz_approx", "mollify_series"]

log = logging.getLogger(__name__)

CELL_SAMPLES = 17
MAX_CELLS = 4_000_000
MAX_DEPTH = 48
MAX_REPAIRS = 12


@dataclass(frozen=True)
class MollifierCover:
    lo: float
    hi: float
    breaks: np.ndarray = field(repr=False)  # c_0 = lo < c_1 < ... < c_K = hi
    radii: np.ndarray = field(repr=False)  # r_0 = r_K = 0
    anchors: np.ndarray = field(repr=False)  # (K, d), anchors[k] = f(mid U_k)

    @property
    def size(self) -> int:
        return len(self.breaks) - 1

    @property
    def cells(self) -> np.ndarray:
        left = self.breaks[:-1] - self.radii[:-1]
        right = self.breaks[1:] + self.radii[1:]
        return np.stack([left, right], axis=-1)

    def psi(self, x) -> np.ndarray:
        """Distance from each point to the complement of each nearby cell.

        Returns ``(m, 3)`` values for cells ``k-1, k, k+1`` around the base cell
        ``k`` containing ``x``, together with those indices.
        """
        x = as_points(x)
        K = self.size
        k = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, K - 1)
        idx = np.stack([k - 1, k, k + 1], axis=-1)
        valid = (idx >= 0) & (idx < K)
        safe = np.clip(idx, 0, K - 1)
        cells = self.cells
        left = cells[safe, 0]
        right = cells[safe, 1]
        xx = x[:, None]
        first = safe == 0
        last = safe == K - 1
        # cells are open relative to [lo, hi]: the first holds lo, the last holds hi
        inside = valid & ((xx > left) | first) & ((xx < right) | last)
        dl = np.where(first, np.inf, xx - left)
        dr = np.where(last, np.inf, right - xx)
        psi = np.where(inside, np.minimum(dl, dr), 0.0)
        return psi, safe

    def weights(self, x) -> tuple:
        psi, idx = self.psi(x)
        infinite = np.isinf(psi)
        total = psi.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore"):
            phi = np.where(np.isinf(total), infinite.astype(float), psi / total)
        return phi, idx

    def __call__(self, x) -> np.ndarray:
        phi, idx = self.weights(x)
        return np.einsum("mk,mkd->md", phi, self.anchors[idx])

    def knots(self) -> tuple:
        """Knots and values of the piecewise-linear form of the cover's map."""
        K = self.size
        xs = [np.array([self.lo])]
        vs = [self.anchors[:1]]
        inner = self.breaks[1:-1]
        r = self.radii[1:-1]
        if K > 1:
            pts = np.stack([inner - r, inner + r], axis=-1).ravel()
            vals = np.stack([self.anchors[:-1], self.anchors[1:]], axis=1).reshape(-1, self.anchors.shape[1])
            xs.append(pts)
            vs.append(vals)
        xs.append(np.array([self.hi]))
        vs.append(self.anchors[-1:])
        return np.concatenate(xs), np.concatenate(vs)


def _oscillation_bound(target, vals):
    # norm of the coordinatewise ranges bounds the diameter for L1, L2, Linf
    spread = vals.max(axis=1) - vals.min(axis=1)
    return norm(target, spread)


def _bisect(f, target, lo, hi, eps, seeds):
    """Leaves of the bisection tree as sorted (left, right) arrays."""
    pending_l = seeds[:-1].copy()
    pending_r = seeds[1:].copy()
    done_l, done_r = [], []
    t = np.linspace(0.0, 1.0, CELL_SAMPLES)
    total = 0
    for depth in range(MAX_DEPTH + 1):
        if len(pending_l) == 0:
            break
        w = pending_r - pending_l
        pl = np.maximum(lo, pending_l - w / 4)
        pr = np.minimum(hi, pending_r + w / 4)
        pts = pl[:, None] + (pr - pl)[:, None] * t[None, :]
        vals = f(pts.ravel()).reshape(len(pl), CELL_SAMPLES, target.dim)
        good = _oscillation_bound(target, vals) < eps / 2
        done_l.append(pending_l[good])
        done_r.append(pending_r[good])
        total += int(good.sum())
        bad_l, bad_r = pending_l[~good], pending_r[~good]
        if total + 2 * len(bad_l) > MAX_CELLS:
            raise MollificationError(f"cell budget of {MAX_CELLS} exhausted at eps={eps}")
        mid = 0.5 * (bad_l + bad_r)
        if np.any((mid <= bad_l) | (mid >= bad_r)):
            raise MollificationError("oscillation persists below floating-point resolution")
        pending_l = np.concatenate([bad_l, mid])
        pending_r = np.concatenate([mid, bad_r])
    else:
        raise MollificationError(f"refinement depth {MAX_DEPTH} exhausted at eps={eps}")
    left = np.concatenate(done_l)
    right = np.concatenate(done_r)
    order = np.argsort(left)
    return left[order], right[order]


def _assemble(f, lo, hi, left, right):
    breaks = np.concatenate([left, right[-1:]])
    w = np.diff(breaks)
    radii = np.zeros(len(breaks))
    radii[1:-1] = np.minimum(w[:-1], w[1:]) / 4
    cells_l = breaks[:-1] - radii[:-1]
    cells_r = breaks[1:] + radii[1:]
    anchors = f(0.5 * (cells_l + cells_r))
    return MollifierCover(lo, hi, breaks, radii, anchors)


def build_cover(f, target: NormedTarget, lo: float, hi: float, eps: float,
                check_points: int | None = None) -> MollifierCover:
    """Cover of ``[lo, hi]`` whose partition-of-unity average is within ``eps`` of ``f``.

    The result is verified on a dense uniform grid plus all cell midpoints and
    breakpoints; cells containing violations are split and the cover rebuilt.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not lo < hi:
        raise ValueError("empty segment")
    n_check = check_points or max(10_001, int(SAMPLES_PER_UNIT * (hi - lo)) + 1)
    probe = np.linspace(lo, hi, n_check)
    f_probe = f(probe)
    seeds = np.array([lo, hi])
    for _ in range(MAX_REPAIRS + 1):
        left, right = _bisect(f, target, lo, hi, eps, seeds)
        cover = _assemble(f, lo, hi, left, right)
        xs, _ = cover.knots()
        mids = 0.5 * (xs[:-1] + xs[1:])
        extra = np.concatenate([xs, mids])
        err_probe = norm(target, f_probe - cover(probe))
        err_extra = norm(target, f(extra) - cover(extra))
        bad = np.concatenate([probe[err_probe > eps], extra[err_extra > eps]])
        if len(bad) == 0:
            return cover
        # split every leaf holding a violation and go again
        k = np.clip(np.searchsorted(cover.breaks, bad, side="right") - 1, 0, cover.size - 1)
        split = np.unique(k)
        mids = 0.5 * (cover.breaks[split] + cover.breaks[split + 1])
        seeds = np.unique(np.concatenate([cover.breaks, mids]))
        log.debug("mollifier repair: %d violations, %d cells split", len(bad), len(split))
    raise MollificationError(f"could not reach eps={eps} after {MAX_REPAIRS} repairs")


def lipschitz_approx(f, target: NormedTarget, eps: float, segment=None,
                     domain: Interval | None = None) -> LipschitzMap:
    """Piecewise-linear map within ``eps`` of ``f`` on ``segment`` with exact constant."""
    if segment is None:
        if domain is None or not domain.bounded:
            raise ValueError("need a compact segment")
        segment = domain.inner_segment()
    lo, hi = map(float, segment)
    if domain is None:
        domain = Interval(lo, hi)
    cover = build_cover(f, target, lo, hi, eps)
    knots, values = cover.knots()
    # coincident knots appear only where two anchors agree
    keep = np.concatenate([[True], np.diff(knots) > 0])
    m = LipschitzMap.piecewise_linear(domain, target, knots[keep], values[keep])
    object.__setattr__(m, "cover", cover)
    return m


@dataclass(frozen=True)
class EpsSchedule:
    """Geometric accuracy schedule ``eps_n = eps1 * ratio**(n-1)``."""

    eps1: float = 0.5
    ratio: float = 0.5

    def __post_init__(self):
        if not self.eps1 > 0 or not 0 < self.ratio < 1:
            raise ValueError("need eps1 > 0 and 0 < ratio < 1")

    def __call__(self, n: int) -> float:
        return self.eps1 * self.ratio ** (n - 1)

    def tail_sum(self, n: int) -> float:
        """``sum_{m >= n} eps_m``."""
        return self(n) / (1 - self.ratio)

    def to_dict(self):
        return {"kind": "geometric", "eps1": self.eps1, "ratio": self.ratio}


def mollify_series(source: BaireSeries, schedule: EpsSchedule, segment, stage_index=None,
                   truncation: int | None = None) -> BaireSeries:
    """Series of Lipschitz stages ``lipschitz_approx(h_{k(n)}, eps_n)`` on ``segment(n)``.

    ``stage_index`` picks a subsequence ``k(n)`` of the source stages (identity
    by default); any subsequence of a series with summable increments keeps
    them summable.  Stages are built lazily and cached.
    """
    k_of = stage_index or (lambda n: n)
    domain, target = source.domain, source.target

    @lru_cache(maxsize=None)
    def stage(n):
        return lipschitz_approx(source.stage(k_of(n)), target, schedule(n), segment(n), domain)

    def tail(n, x):
        x = as_points(x)
        a, b = segment(n)
        bound = 2 * schedule.tail_sum(n) - schedule(n) + source.tail(k_of(n), x)
        return np.where((x >= a) & (x <= b), bound, np.inf)

    return BaireSeries(domain, target, stage, truncation or source.truncation, tail,
                       f"mollified({source.name})", source.limit)
