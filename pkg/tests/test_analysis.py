import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from baireone.analysis import (
    ac_modulus,
    check_blend_constant,
    default_grid,
    lipschitz_estimate,
    piecewise_ac_certificate,
    pseudo_norm_obstruction,
    variation,
)
from baireone.demos import SCALAR, UNIT, xsin
from baireone.funcspace import LipschitzMap


def _xsin_extrema_oracle(lo, hi):
    """Variation of x sin(1/x) on [lo, hi] from its critical points.

    With u = 1/x the derivative vanishes where sin u = u cos u; there is one
    root in every (k pi, k pi + pi/2), found here by bisection.
    """
    u_lo, u_hi = 1 / hi, 1 / lo
    k = np.arange(0, int(u_hi / math.pi) + 2)
    a = k * math.pi + 1e-12
    b = k * math.pi + math.pi / 2
    h = lambda u: np.sin(u) - u * np.cos(u)
    for _ in range(200):
        m = 0.5 * (a + b)
        same = np.sign(h(m)) == np.sign(h(a))
        a, b = np.where(same, m, a), np.where(same, b, m)
    roots = 0.5 * (a + b)
    roots = roots[(roots > u_lo) & (roots < u_hi) & (k > 0)]
    xs = np.sort(np.concatenate([[lo, hi], 1 / roots]))
    return float(np.abs(np.diff(xs * np.sin(1 / xs))).sum())


def test_variation_identity():
    ident = lambda x: np.asarray(x)[:, None]
    for n in (2, 10, 1001):
        assert variation(ident, (0, 1), n).total == pytest.approx(1.0, abs=1e-12)


def test_variation_sin():
    assert variation(np.sin, (0, 2 * np.pi), 10**5).total == pytest.approx(4.0, abs=1e-3)


def test_variation_xsin_matches_critical_points():
    lo = 1 / (100 * math.pi)
    got = variation(xsin(), (lo, 1.0), 10**6).total
    assert got == pytest.approx(_xsin_extrema_oracle(lo, 1.0), rel=0.01)


def test_variation_rejects_single_point():
    with pytest.raises(ValueError):
        variation(np.sin, (0, 1), 1)


def test_variation_monotone_under_doubling():
    rng = np.random.default_rng(0)
    for _ in range(100):
        c = rng.normal(size=4)
        f = lambda x, c=c: c[0] * np.sin(5 * c[1] * x) + c[2] * np.cos(3 * c[3] * x ** 2)
        totals = [variation(f, (0, 1), 2**j + 1).total for j in range(2, 10)]
        assert all(b >= a - 1e-12 for a, b in zip(totals, totals[1:]))


def test_ac_modulus_identity_and_lipschitz_bound():
    ident = lambda x: np.asarray(x)[:, None]
    assert ac_modulus(ident, (0, 1), 0.1) == pytest.approx(0.1, abs=1e-6)
    sq = lambda x: np.asarray(x)[:, None] ** 2
    got = ac_modulus(sq, (0, 1), 0.05)
    # convex increasing: the best collection is the single right-end interval
    assert got <= 1 - 0.95**2 + 1e-12
    assert got >= 1 - 0.95**2 - 1e-6
    assert got <= 2 * 0.05


def test_ac_modulus_concentrates_on_a_ramp():
    ramp = lambda x: np.clip((np.asarray(x) - 0.5) / 0.01, 0, 1)[:, None]
    assert ac_modulus(ramp, (0, 1), 0.02) >= 1 - 1e-6


def test_ac_modulus_matches_whole_cell_brute_force():
    rng = np.random.default_rng(2)
    xs = np.linspace(0, 1, 9)
    vals = rng.normal(size=9)
    f = lambda x: np.interp(x, xs, vals)[:, None]
    inc = np.abs(np.diff(vals))
    for k in range(1, 8):
        delta = k / 8 + 1e-9
        best = max(sum(inc[list(c)]) for c in itertools.combinations(range(8), k))
        got = ac_modulus(f, (0, 1), delta, xs)
        # the 1e-9 of budget left after k whole cells buys a sliver of one more
        assert best <= got <= best + inc.max() * 8 * 1e-9 + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 0.99), st.floats(1e-3, 0.99))
def test_ac_modulus_monotone_and_below_variation(d1, d2):
    f = xsin()
    xs = default_grid(0, 1, 2001)
    lo, hi = sorted((d1, d2))
    a, b = ac_modulus(f, (0, 1), lo, xs), ac_modulus(f, (0, 1), hi, xs)
    assert a <= b + 1e-12
    assert b <= variation(f, (0, 1), xs).total + 1e-12


def test_lipschitz_estimates():
    assert lipschitz_estimate(lambda x: 3 * np.asarray(x)[:, None], (0, 1)) == pytest.approx(3.0, abs=1e-9)
    assert lipschitz_estimate(lambda x: np.abs(np.asarray(x))[:, None], (-1, 1)) == pytest.approx(1.0, abs=1e-9)
    assert lipschitz_estimate(lambda x: np.asarray(x)[:, None] ** 2, (0, 1), 10**4) == pytest.approx(2.0, abs=1e-3)


def _pl(knots, values):
    return LipschitzMap.piecewise_linear(UNIT, SCALAR, knots, values)


def test_blend_closed_form_equality():
    M, L = 1.7, 3.0
    g = _pl([0.0, 1.0], [0.0, 0.0])
    h = _pl([0.0, 1.0], [M, M])
    phi = _pl([0.2, 0.2 + 1 / L], [0.0, 1.0])
    res = check_blend_constant(g, h, phi, M)
    assert res.passed
    assert res.measured == pytest.approx(L * M, abs=1e-9)
    assert res.bound == pytest.approx(L * M, abs=1e-12)


def test_blend_phi_one_gives_g():
    g = _pl([0.0, 0.5, 1.0], [0.0, 1.0, 0.2])
    h = _pl([0.0, 1.0], [5.0, -5.0])
    one = _pl([0.0, 1.0], [1.0, 1.0])
    res = check_blend_constant(g, h, one)
    assert res.passed and res.measured <= g.constant * (1 + 1e-12)


def test_blend_random_triples():
    rng = np.random.default_rng(42)
    for _ in range(100):
        k = np.sort(rng.uniform(0, 1, 6))
        g = _pl(k, rng.normal(size=6))
        h = _pl(np.sort(rng.uniform(0, 1, 5)), rng.normal(size=5))
        phi = _pl(np.sort(rng.uniform(0, 1, 4)), rng.uniform(0, 1, 4))
        assert check_blend_constant(g, h, phi).passed


def test_blend_rejects_phi_out_of_range():
    g = _pl([0.0, 1.0], [0.0, 1.0])
    bad = _pl([0.0, 1.0], [0.0, 1.5])
    with pytest.raises(ValueError):
        check_blend_constant(g, g, bad)


def test_certificate_telescoping_tail():
    n = np.arange(1, 50)
    a = np.concatenate([1 - 2.0 ** -(n - 1), [1.0]])
    c = piecewise_ac_certificate(a, np.ones(len(a) - 1))
    assert c.tail == pytest.approx(1.0, abs=1e-15)


def test_certificate_geometric_constants():
    n = np.arange(1, 25)
    a = np.concatenate([1 - 4.0 ** -(n - 1), [1.0]])
    C = 2.0 ** np.arange(1, len(a))
    c = piecewise_ac_certificate(a, C)
    oracle = sum(2.0**j * (a[j] - a[j - 1]) for j in range(1, len(a)))
    assert math.isfinite(c.tail) and c.tail == pytest.approx(oracle, rel=1e-12)


def test_delta_for_eps_constant_one():
    n = np.arange(1, 40)
    a = np.concatenate([1 - 2.0 ** -(n - 1), [1.0]])
    c = piecewise_ac_certificate(a, np.ones(len(a) - 1))
    delta, m = c.delta_for_eps(0.1)
    assert delta == 0.05
    # the smallest m whose tail beyond it is below eps/2
    assert c.tail_from(m + 1) < 0.05 <= c.tail_from(m)


def test_certificate_validation():
    with pytest.raises(ValueError):
        piecewise_ac_certificate([0, 0.5, 0.4], [1, 1])
    with pytest.raises(ValueError):
        piecewise_ac_certificate([0, 0.5, 1], [1])
    with pytest.raises(ValueError):
        piecewise_ac_certificate([0, 1], [-1])


def test_certificate_delta_is_sound_for_piecewise_map():
    # a map with slope C_n on [a_n, a_{n+1}]; its true modulus must respect the recipe
    a = np.array([0.0, 0.5, 0.75, 0.875, 1.0])
    C = np.array([1.0, 4.0, 0.5, 8.0])
    vals = np.concatenate([[0.0], np.cumsum(C * np.diff(a))])
    f = lambda x: np.interp(x, a, vals)[:, None]
    cert = piecewise_ac_certificate(a, C)
    for eps in (0.5, 0.1, 0.02):
        got = cert.delta_for_eps(eps)
        assert ac_modulus(f, (0, 1), got[0], default_grid(0, 1, 10_001, a)) < eps


def test_pseudo_norm_table():
    rows = pseudo_norm_obstruction(0.5, [1e-2, 1e-4])
    assert rows[0]["ratio"] == pytest.approx(10.0, rel=1e-12)
    assert rows[1]["ratio"] == pytest.approx(100.0, rel=1e-12)
    r = pseudo_norm_obstruction(0.9, [1e-4])[0]
    assert r["ratio"] == pytest.approx(10**0.4, rel=1e-12)
    assert r["ratio"] == pytest.approx(r["h_pow_p_minus_1"], rel=1e-14)
    with pytest.raises(ValueError):
        pseudo_norm_obstruction(1.0, [0.1])
