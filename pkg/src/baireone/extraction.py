"""Recovering the diagonal of a separately continuous surface as a Baire-one series.

At level ``n`` the width is ``alpha = 2**-n`` and the line is covered by the
cells ``V_i = ((i-1)h, (i+1)h)`` with ``h = alpha/4``.  Each cell has the hat
weight centred at ``x_i = i*h`` and the probe ``y_i = x_i + 3*alpha/4``, so for
``t`` in ``V_i`` we always have ``t + alpha/2 < y_i < t + alpha``.  The level
map is ``g_n(x) = sum_i phi_i(x) f(x, y_i)``.

On an interval with a finite right end the probes would leave the domain, so
the construction is carried out in line coordinates ``s = phi(x)`` for a
locally bi-Lipschitz ``phi`` onto the real line, with ``f(x, phi^-1(t))`` as
the probed map.  Closed finite endpoints ``e`` get ``g_n(e) = f(e, e)`` and a
linear connector of width ``length * 2**-(n+2)`` back to the interior map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import OutsideDomainError
from .funcspace import Interval, NormedTarget, as_points, norm

__all__ = [
    "ExtractionGrid",
    "LevelCertificate",
    "ExtractionSequence",
    "Transfer",
    "transfer_to_line",
    "build_g_n",
    "grid_certificate",
    "extract_series",
    "LevelReport",
    "ExtractionResult",
    "REPORT_COLUMNS",
    "WINDOW_SAMPLES",
]

WINDOW_SAMPLES = 33

_SCALAR = NormedTarget(1, "L2")


@dataclass(frozen=True)
class ExtractionGrid:
    """Cells, hat weights and probes of one level."""

    n: int

    @property
    def alpha(self) -> float:
        return math.ldexp(1.0, -self.n)

    @property
    def h(self) -> float:
        return self.alpha / 4

    def center(self, i):
        return np.asarray(i, dtype=float) * self.h

    def probe(self, i):
        return (np.asarray(i, dtype=float) + 3) * self.h

    def cell(self, i) -> tuple:
        i = np.asarray(i, dtype=float)
        return (i - 1) * self.h, (i + 1) * self.h

    def weight(self, i, s) -> np.ndarray:
        return np.maximum(0.0, 1 - np.abs(as_points(s) / self.h - np.asarray(i, dtype=float)))

    def locate(self, s) -> tuple:
        """Lower cell index and the two hat weights at each point.

        The point lies in cell ``i0`` with weight ``w0`` and, when ``w1 > 0``,
        also in cell ``i0 + 1`` with weight ``w1``.
        """
        q = as_points(s) / self.h
        i0 = np.floor(q)
        w1 = q - i0
        return i0, 1 - w1, w1


@dataclass(frozen=True)
class LevelCertificate:
    beta: np.ndarray
    gamma: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    def holds(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.lhs <= self.rhs + tol))


def _level(n, s, probe, target):
    """Level map and certificate data in line coordinates."""
    grid = ExtractionGrid(n)
    s = as_points(s)
    i0, w0, w1 = grid.locate(s)
    y0 = grid.probe(i0)
    y1 = grid.probe(i0 + 1)
    v0 = probe(y0)
    two = w1 > 0
    v1 = np.where(two[:, None], probe(y1), v0) if two.any() else v0
    g = w0[:, None] * v0 + w1[:, None] * v1
    # larger weight wins, ties go to the lower index
    low_wins = w0 >= w1
    vi = np.where(low_wins[:, None], v0, v1)
    vj = np.where(two[:, None], np.where(low_wins[:, None], v1, v0), vi)
    yi = np.where(low_wins, y0, y1)
    yj = np.where(two, np.where(low_wins, y1, y0), yi)
    cert = LevelCertificate(yi - s, yj - s, norm(target, g - vi), norm(target, vi - vj))
    return g, cert


def build_g_n(f, n: int, x, target: NormedTarget = _SCALAR, domain: Optional[Interval] = None) -> np.ndarray:
    """``sum_i phi_i(x) f(x, y_i)`` on the level-``n`` grid of the real line.

    >>> float(build_g_n(lambda x, y: 2 + 0 * y[:, None], 3, [0.3])[0, 0])
    2.0
    """
    g, _ = _direct(f, n, x, target, domain)
    return g


def grid_certificate(f, n: int, x, target: NormedTarget = _SCALAR,
                       domain: Optional[Interval] = None) -> LevelCertificate:
    """``beta, gamma`` and both sides of ``p(g - f(x, x+beta)) <= p(f(x, x+beta) - f(x, x+gamma))``."""
    _, cert = _direct(f, n, x, target, domain)
    return cert


def _direct(f, n, x, target, domain):
    x = as_points(x)

    def probe(y):
        if domain is not None:
            bad = ~domain.contains(y)
            if bad.any():
                raise OutsideDomainError(
                    f"level {n} probe {float(y[bad][0])!r} leaves {domain}; use extract_series")
        return _values(f(x, y), len(x))

    return _level(n, x, probe, target)


def _values(v, m):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != m:
        v = np.broadcast_to(v, (m, v.shape[1])).copy()
    return v


@dataclass(frozen=True)
class Transfer:
    """Increasing locally bi-Lipschitz map of an interval onto the real line."""

    kind: str  # "identity", "bounded", "left-infinite"
    a: float
    b: float
    phi: Callable = field(repr=False)
    phi_inverse: Callable = field(repr=False)


def transfer_to_line(a: float, b: float) -> tuple:
    """``phi(x) = 1/(b-x) - 1/(x-a)`` on ``(a, b)`` and its inverse.

    The inverse solves ``s (b-x)(x-a) = (2x - a - b)`` in a cancellation-free
    form, measuring from the nearer endpoint.

    >>> phi, inv = transfer_to_line(0.0, 1.0)
    >>> float(phi(np.array([0.5]))[0])
    0.0
    """
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise ValueError(f"need finite a < b, got ({a}, {b})")
    L = b - a

    def phi(x):
        x = as_points(x)
        return 1 / (b - x) - 1 / (x - a)

    def phi_inverse(s):
        s = as_points(s)
        with np.errstate(over="ignore"):
            sL = s * L
            R = np.sqrt(sL * sL + 4)
            R = np.where(np.isfinite(R), R, np.abs(sL))
            right = b - 2 * L / (R + sL + 2)
            left = a + 2 * L / (R - sL + 2)
        return np.where(s > 0, right, left)

    return phi, phi_inverse


def _transfer_for(domain: Interval) -> Transfer:
    lo, hi = domain.lo, domain.hi
    if math.isinf(hi):
        ident = lambda v: as_points(v)
        return Transfer("identity", lo, hi, ident, ident)
    if math.isinf(lo):
        b = hi

        def phi(x):
            return -np.log(b - as_points(x))

        def phi_inverse(s):
            return b - np.exp(-as_points(s))

        return Transfer("left-infinite", lo, hi, phi, phi_inverse)
    phi, inv = transfer_to_line(lo, hi)
    return Transfer("bounded", lo, hi, phi, inv)


@dataclass
class ExtractionSequence:
    """Level maps ``g_n`` of a surface oracle on an interval."""

    surface: Callable
    domain: Interval
    target: NormedTarget = _SCALAR
    transfer: Transfer = None

    def __post_init__(self):
        if self.transfer is None:
            self.transfer = _transfer_for(self.domain)

    def splice_width(self, n: int) -> float:
        length = self.domain.length if self.domain.bounded else 1.0
        return length * math.ldexp(1.0, -(n + 2))

    def _interior(self, n, x):
        x = as_points(x)
        tr = self.transfer
        s = tr.phi(x)

        def probe(t):
            return _values(self.surface(x, tr.phi_inverse(t)), len(x))

        return _level(n, s, probe, self.target)

    def _spliced(self, n, x):
        """Masks and connector data for closed finite endpoints."""
        d = self.domain
        w = self.splice_width(n)
        masks = []
        if d.closed_lo and math.isfinite(d.lo):
            masks.append((d.lo, d.lo + w, x <= d.lo + w))
        if d.closed_hi and math.isfinite(d.hi):
            masks.append((d.hi, d.hi - w, x >= d.hi - w))
        return masks

    def level(self, n: int, x) -> np.ndarray:
        return self.evaluate(n, x)[0]

    def evaluate(self, n: int, x) -> tuple:
        """``(g_n(x), certificate, spliced)``; certificates live in line coordinates."""
        x = as_points(x)
        self.domain.check(x)
        g = np.zeros((len(x), self.target.dim))
        spliced = np.zeros(len(x), dtype=bool)
        for _, _, m in self._spliced(n, x):
            spliced |= m
        inner = ~spliced
        nan = np.full(len(x), np.nan)
        beta, gamma, lhs, rhs = nan.copy(), nan.copy(), nan.copy(), nan.copy()
        if inner.any():
            gi, cert = self._interior(n, x[inner])
            g[inner] = gi
            beta[inner], gamma[inner] = cert.beta, cert.gamma
            lhs[inner], rhs[inner] = cert.lhs, cert.rhs
        for e, anchor, m in self._spliced(n, x):
            if not m.any():
                continue
            ee = np.array([e])
            fe = _values(self.surface(ee, ee), 1)[0]
            ga, _ = self._interior(n, np.array([anchor]))
            lam = (x[m] - e) / (anchor - e)
            g[m] = fe + lam[:, None] * (ga[0] - fe)
        return g, LevelCertificate(beta, gamma, lhs, rhs), spliced

    def diagonal(self, x) -> np.ndarray:
        x = as_points(x)
        return _values(self.surface(x, x), len(x))

    def window_variation(self, n: int, x) -> np.ndarray:
        """Sampled variation of ``t -> f(x, phi^-1(t))`` on ``[s + 2^-(n+1), s + 2^-n]``."""
        x = as_points(x)
        tr = self.transfer
        s = tr.phi(x)
        u = np.linspace(0.5, 1.0, WINDOW_SAMPLES) * math.ldexp(1.0, -n)
        ts = s[:, None] + u[None, :]
        xs = np.repeat(x, WINDOW_SAMPLES)
        v = _values(self.surface(xs, tr.phi_inverse(ts.ravel())), len(xs))
        v = v.reshape(len(x), WINDOW_SAMPLES, -1)
        return norm(self.target, np.diff(v, axis=1)).sum(axis=1)


@dataclass(frozen=True)
class LevelReport:
    level: int
    max_error: float
    max_increment: float
    max_partial_sum: float
    max_window_variation: float
    certificate_ok: bool
    beta_gamma_ok: bool
    spliced: int

    def row(self) -> tuple:
        return (self.level, self.max_error, self.max_increment, self.max_partial_sum,
                self.max_window_variation, int(self.certificate_ok), int(self.beta_gamma_ok), self.spliced)


REPORT_COLUMNS = ("level", "max_error", "max_increment", "max_partial_sum",
                  "max_window_variation", "certificate_ok", "beta_gamma_ok", "spliced")


@dataclass
class ExtractionResult:
    sequence: ExtractionSequence
    samples: np.ndarray
    values: np.ndarray  # (N, m, d), level n at index n-1
    diagonal: np.ndarray  # (m, d)
    errors: np.ndarray  # (N, m)
    increments: np.ndarray  # (N-1, m), |g_{n+1} - g_n|
    certificates: list
    spliced: np.ndarray  # (N, m)
    reports: list

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.increments, axis=0)


def extract_series(f, N: int, sample_grid, domain: Interval, target: NormedTarget = _SCALAR,
                   cert_tol: float = 1e-12) -> ExtractionResult:
    """Levels ``1..N`` of the diagonal series at the sample points, with a per-level report."""
    if N < 1:
        raise ValueError("need at least one level")
    seq = f if isinstance(f, ExtractionSequence) else ExtractionSequence(f, domain, target)
    x = as_points(sample_grid)
    seq.domain.check(x)
    diag = seq.diagonal(x)
    values, certs, spl = [], [], []
    for n in range(1, N + 1):
        g, cert, sp = seq.evaluate(n, x)
        values.append(g)
        certs.append(cert)
        spl.append(sp)
    values = np.array(values)
    errors = norm(target, values - diag[None])
    increments = norm(target, np.diff(values, axis=0))
    partial = np.cumsum(increments, axis=0)
    reports = []
    for n in range(1, N + 1):
        cert = certs[n - 1]
        inner = ~spl[n - 1]
        lo, hi = math.ldexp(1.0, -n - 1), math.ldexp(1.0, -n)
        bg_ok = bool(np.all((cert.beta[inner] > lo) & (cert.beta[inner] < hi)
                            & (cert.gamma[inner] > lo) & (cert.gamma[inner] < hi)))
        cert_ok = bool(np.all(cert.lhs[inner] <= cert.rhs[inner] + cert_tol))
        wv = seq.window_variation(n, x[inner]) if inner.any() else np.zeros(1)
        reports.append(LevelReport(
            n,
            float(errors[n - 1].max()),
            float(increments[n - 1].max()) if n < N else math.nan,
            float(partial[n - 1].max()) if n < N else math.nan,
            float(wv.max()),
            cert_ok,
            bg_ok,
            int(spl[n - 1].sum()),
        ))
    return ExtractionResult(seq, x, values, diag, errors, increments, certs, np.array(spl), reports)
