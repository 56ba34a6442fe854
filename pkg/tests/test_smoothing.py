import numpy as np
import pytest

from baireone.demos import SCALAR, UNIT, sqrt_fn, weierstrass_partial, xsin
from baireone.errors import MollificationError
from baireone.expr import parse
from baireone.funcspace import ExpressionMap, NormedTarget, constant_series
from baireone.smoothing import EpsSchedule, build_cover, lipschitz_approx, mollify_series

GRID = np.linspace(0.0, 1.0, 10_000)


def _sup_err(f, g, xs=GRID, target=SCALAR):
    from baireone.funcspace import norm
    return float(norm(target, f(xs) - g(xs)).max())


def test_constant_map_is_reproduced():
    c = ExpressionMap([parse("2.5")])
    g = lipschitz_approx(c, SCALAR, 0.01, (0.0, 1.0))
    assert g.constant == 0.0
    assert np.all(g(GRID) == 2.5)


def test_sqrt_example():
    g = lipschitz_approx(sqrt_fn(), SCALAR, 0.1, (0.0, 1.0))
    assert _sup_err(sqrt_fn(), g) <= 0.1
    assert g.constant_kind == "certified"


def test_xsin_example():
    g = lipschitz_approx(xsin(), SCALAR, 0.05, (0.0, 1.0))
    assert _sup_err(xsin(), g) <= 0.05
    assert np.isfinite(g.constant) and g.constant > 0


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_weierstrass_partial(eps):
    w = weierstrass_partial(6)
    g = lipschitz_approx(w, SCALAR, eps, (0.0, 1.0))
    assert _sup_err(w, g) <= eps
    # independent check off the verification grid
    xs = np.random.default_rng(5).uniform(0, 1, 100_000)
    assert _sup_err(w, g, xs) <= eps


def test_partition_of_unity_and_overlap():
    cover = build_cover(xsin(), SCALAR, 0.0, 1.0, 0.05)
    xs = np.concatenate([GRID, cover.knots()[0]])
    phi, _ = cover.weights(xs)
    assert np.max(np.abs(phi.sum(axis=1) - 1)) <= 1e-12
    # every point meets at most two cells
    psi, _ = cover.psi(xs)
    assert np.all((psi > 0).sum(axis=1) <= 2)
    cells = cover.cells
    inside = (xs[:, None] > cells[None, :, 0]) & (xs[:, None] < cells[None, :, 1])
    assert inside.sum(axis=1).max() <= 2


def test_cover_formula_matches_piecewise_linear_form():
    cover = build_cover(sqrt_fn(), SCALAR, 0.0, 1.0, 0.02)
    g = lipschitz_approx(sqrt_fn(), SCALAR, 0.02, (0.0, 1.0))
    np.testing.assert_allclose(cover(GRID), g(GRID), rtol=0, atol=1e-14)


def test_anchor_oscillation_per_cell():
    f = xsin()
    cover = build_cover(f, SCALAR, 0.0, 1.0, 0.05)
    cells = np.clip(cover.cells, 0.0, 1.0)
    t = np.linspace(0, 1, 9)
    pts = cells[:, :1] + (cells[:, 1:] - cells[:, :1]) * t
    vals = f(pts.ravel()).reshape(pts.shape)
    assert np.all(vals.max(axis=1) - vals.min(axis=1) < 0.05)


def test_vector_target():
    f = ExpressionMap([parse("sin(3*x)"), parse("sqrt(x)")])
    t = NormedTarget(2, "L2")
    g = lipschitz_approx(f, t, 0.02, (0.0, 1.0))
    assert _sup_err(f, g, target=t) <= 0.02


def test_budget_exhaustion_reported(monkeypatch):
    from baireone import smoothing
    monkeypatch.setattr(smoothing, "MAX_CELLS", 20_000)
    wild = ExpressionMap([parse("sin(1/x)")], overrides={0.0: 0.0})
    with pytest.raises(MollificationError):
        lipschitz_approx(wild, SCALAR, 0.1, (0.0, 1.0))


def test_eps_validation():
    with pytest.raises(ValueError):
        lipschitz_approx(sqrt_fn(), SCALAR, 0.0, (0.0, 1.0))
    with pytest.raises(ValueError):
        EpsSchedule(0.5, 1.0)


def test_schedule_tail_sum():
    s = EpsSchedule(0.5, 0.5)
    assert s(3) == 0.125
    assert s.tail_sum(3) == pytest.approx(sum(s(m) for m in range(3, 200)))


def test_dyadic_schedule_increments():
    # with eps_n = 2^-n consecutive mollified stages of one map differ by <= eps_n + eps_{n+1}
    sched = EpsSchedule(0.5, 0.5)
    src = constant_series(UNIT, SCALAR, sqrt_fn())
    moll = mollify_series(src, sched, lambda n: (0.0, 1.0))
    prev = moll.stage(1)(GRID)
    for n in range(1, 13):
        cur = moll.stage(n + 1)(GRID)
        assert np.abs(cur - prev).max() <= sched(n) + sched(n + 1)
        prev = cur
