"""Built-in example functions and series."""

from __future__ import annotations

import numpy as np

from .expr import parse
from .funcspace import BaireSeries, ExpressionMap, Interval, NormedTarget, as_points, constant_series

__all__ = [
    "UNIT",
    "SCALAR",
    "identity",
    "xsin",
    "sqrt_fn",
    "step_stage",
    "step_limit",
    "step_series",
    "weierstrass_partial",
    "weierstrass_series",
    "WEIERSTRASS_TERMS",
]

UNIT = Interval(0.0, 1.0)
SCALAR = NormedTarget(1, "L2")
WEIERSTRASS_TERMS = 6


def identity():
    return ExpressionMap([parse("x")])


def xsin():
    """``x*sin(1/x)`` with its removable singularity filled by 0."""
    return ExpressionMap([parse("x*sin(1/x)")], overrides={0.0: 0.0})


def sqrt_fn():
    return ExpressionMap([parse("sqrt(x)")])


def step_stage(n: int):
    """``h_n = ramp(1/2 - 1/n, 1/2, x)``."""
    lo = 0.5 - 1.0 / n

    def h(x, _lo=lo, _n=n):
        x = as_points(x)
        return np.clip((x - _lo) * _n, 0.0, 1.0)[:, None]

    return h


def step_limit(x):
    x = as_points(x)
    return (x >= 0.5).astype(float)[:, None]


def _step_tail(n, x):
    # h_n(x) decreases to 0 in n for x < 1/2 and is 1 from n = 1 on for x >= 1/2,
    # so the increments telescope to h_n(x) - lim h_m(x)
    x = as_points(x)
    return np.where(x < 0.5, step_stage(n)(x)[:, 0], 0.0)


def step_series(domain: Interval = UNIT, truncation: int = 2**22) -> BaireSeries:
    return BaireSeries(domain, SCALAR, step_stage, truncation, _step_tail, "step", step_limit)


def weierstrass_partial(terms: int = WEIERSTRASS_TERMS, upto: int | None = None):
    """``sum_{k=1}^{m} 2^-k cos(3^k x)`` with ``m = min(upto, terms)``."""
    m = terms if upto is None else min(upto, terms)
    k = np.arange(1, m + 1, dtype=float)
    freq = 3.0 ** k
    amp = 2.0 ** -k

    def w(x, _f=freq, _a=amp):
        x = as_points(x)
        if len(_f) == 0:
            return np.zeros((len(x), 1))
        return (np.cos(np.outer(x, _f)) @ _a)[:, None]

    return w


def weierstrass_series(domain: Interval = UNIT, terms: int = WEIERSTRASS_TERMS) -> BaireSeries:
    """Partial sums ``S_n`` of the lacunary cosine series, stopping at ``terms``."""

    def tail(n, x):
        return np.full(len(as_points(x)), max(0.0, 2.0 ** -n - 2.0 ** -terms))

    return BaireSeries(domain, SCALAR, lambda n: weierstrass_partial(terms, n), max(terms, 1),
                       tail, "weierstrass", weierstrass_partial(terms))


def identity_series(domain: Interval = UNIT) -> BaireSeries:
    return constant_series(domain, SCALAR, identity(), "x")
