import math

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from harmzero import catalog
from harmzero.frequency import (
    UndefinedFrequencyError,
    ball_average_sq,
    doubling_check,
    frequency,
    frequency_by_parts,
    frequency_profile,
    sup_ball,
    sup_neg,
    sup_pos,
    sup_sphere,
    zeta_hat,
)
from harmzero.harmonic import l2_inner_ball, l2_inner_sphere, random_harmonic, random_homogeneous_harmonic
from harmzero.poly import MultiPoly, project_to_zero_set


def rand_ball(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v) * rng.random() ** (1 / n)


def test_frequency_homogeneous():
    rng = np.random.default_rng(0)
    for n, k in [(2, 1), (2, 4), (3, 3), (4, 2)]:
        p = random_homogeneous_harmonic(n, k, rng)
        for r in (0.1, 1.0, 3.0):
            assert_allclose(frequency(p, None, r), k, rtol=1e-12)
    assert_allclose(frequency(catalog.cross(2), [0, 0], 1.0), 2.0, rtol=1e-12)


def test_frequency_small_example_sympy():
    # p = y2 + y1*y2 at the origin, exact polar integrals
    r, t, s = sp.symbols("r t s", positive=True)
    X, Y = sp.symbols("X Y")
    f = Y + X * Y
    polar = {X: s * sp.cos(t), Y: s * sp.sin(t)}
    H = sp.integrate(f.subs(polar).subs(s, r) ** 2 * r, (t, 0, 2 * sp.pi))
    grad2 = (sp.diff(f, X) ** 2 + sp.diff(f, Y) ** 2).subs(polar)
    D = sp.integrate(sp.integrate(grad2 * s, (t, 0, 2 * sp.pi)), (s, 0, r))
    N = sp.simplify(r * D / H)
    q = MultiPoly(2, {(0, 1): 1.0, (1, 1): 1.0})
    radii = [1e-3, 1e-2, 1e-1, 1.0]
    prof = frequency_profile(q, [0, 0], radii)
    want = [float(N.subs(r, v)) for v in radii]
    assert_allclose(prof.N_vals, want, rtol=1e-12)
    assert prof.N_vals[0] == pytest.approx(1.0, abs=1e-5)
    assert max(prof.N_vals) <= 2.0


def test_frequency_two_routes_agree():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 4))
        p = random_harmonic(n, int(rng.integers(1, 6)), rng)
        x0 = rand_ball(rng, n)
        r = float(rng.choice([0.1, 0.5, 1.0, 2.0]))
        assert_allclose(frequency(p, x0, r), frequency_by_parts(p, x0, r), rtol=1e-9)


def test_frequency_undefined():
    with pytest.raises(UndefinedFrequencyError):
        frequency(MultiPoly.zero(2), None, 1.0)


def test_frequency_bound_and_monotone_small_battery():
    rng = np.random.default_rng(2)
    radii = [0.1, 0.5, 1.0, 2.0]
    for _ in range(100):
        n = int(rng.integers(2, 4))
        d = int(rng.integers(1, 6))
        p = random_harmonic(n, d, rng)
        N = frequency_profile(p, rand_ball(rng, n), radii).N_vals
        assert max(N) <= d + 1e-9
        assert all(a <= b + 1e-9 for a, b in zip(N, N[1:]))


def test_doubling_examples():
    x1 = catalog.linear(2)
    lhs, rhs = doubling_check(x1, [0, 0], 0.25, 1.0)
    assert lhs / rhs <= 1 + 1e-12
    s = catalog.szulkin()
    for x0 in ([0.3, 0, 0], project_to_zero_set(s, [0.3, 0, 0])):
        lhs, rhs = doubling_check(s, x0, 0.2, 1.0)
        assert lhs <= rhs * (1 + 1e-9)


def test_doubling_sharp_for_homogeneous():
    # equality case: ratio of averages at 2r and r is exactly 4^k
    p = catalog.re_zk(3)
    lhs, rhs = doubling_check(p, [0, 0], 0.2, 1.0)
    assert_allclose(lhs, rhs, rtol=1e-12)
    assert_allclose(lhs / ball_average_sq(p, [0, 0], 0.2), 4.0 ** 3, rtol=1e-12)


def test_doubling_precondition():
    with pytest.raises(ValueError):
        doubling_check(catalog.linear(2), [0, 0], 0.6, 1.0)


def test_ball_average_against_sympy():
    r, t = sp.symbols("r t", positive=True)
    expr = ((r * sp.cos(t)) * (r * sp.sin(t)) + sp.Rational(1, 3)) ** 2 * r
    want = float(sp.integrate(sp.integrate(expr, (t, 0, 2 * sp.pi)), (r, 0, sp.Rational(1, 2))))
    want /= math.pi / 4
    # p = x y recentred at (0,0) plus constant offset 1/3
    p = MultiPoly(2, {(1, 1): 1.0, (0, 0): 1 / 3})
    assert_allclose(ball_average_sq(p, [0.0, 0.0], 0.5), want, rtol=1e-12)


def test_sup_ball_examples():
    assert_allclose(sup_ball(catalog.linear(2), None, 2.0), 2.0, rtol=1e-8)
    assert_allclose(sup_ball(MultiPoly.constant(2, 3.0), None, 1.0), 3.0)
    # grid oracle at resolution 1e-3
    g = np.arange(-1, 1 + 1e-12, 1e-3)
    X, Y = np.meshgrid(g, g)
    inside = X ** 2 + Y ** 2 <= 1
    oracle = np.abs(X * Y)[inside].max()
    assert_allclose(sup_ball(catalog.cross(2), None, 1.0), 0.5, rtol=1e-8)
    assert abs(sup_ball(catalog.cross(2), None, 1.0) - oracle) < 1e-3


def test_sup_is_lower_bound_and_sides():
    p = catalog.szulkin()
    full = sup_ball(p, [0, 0, 0], 1.0, full_output=True)
    assert np.linalg.norm(full.argmax) <= 1 + 1e-12
    assert_allclose(abs(p(full.argmax)), full.value, rtol=1e-12)
    assert max(sup_pos(p, None, 1.0), sup_neg(p, None, 1.0)) == pytest.approx(full.value, rel=1e-9)


def test_zeta_examples():
    cross = catalog.cross(2)
    assert math.isinf(zeta_hat(cross, [0, 0], 0.5, 1).value)
    assert zeta_hat(cross, [1, 0], 0.5, 2).value == 0.0
    # oracle: interior grid plus the boundary circle, both at resolution 1e-3
    g = np.arange(-1, 1 + 1e-12, 1e-3)
    X, Y = np.meshgrid(g, g)
    inside = X ** 2 + Y ** 2 <= 1
    t = np.arange(0, 2 * np.pi, 1e-3)
    X = np.concatenate([X[inside], np.cos(t)])
    Y = np.concatenate([Y[inside], np.sin(t)])
    for r in (0.1, 0.5, 1.0):
        oracle = (r * r * np.abs(X * Y).max()) / (r * np.abs(Y).max())
        assert abs(zeta_hat(cross, [1, 0], r, 1).value - oracle) < 1e-4
        assert zeta_hat(cross, [1, 0], r, 1).value == pytest.approx(r / 2, abs=1e-4)


def _battery(seed, count=60):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 4))
        d = int(rng.integers(2, 5))
        p = random_harmonic(n, d, rng, zero_constant=True)
        x = project_to_zero_set(p, rand_ball(rng, n) * 0.5)
        out.append((p, x))
    return out


def test_growth_constant_stable():
    # sup over B(x,rs) >= c s^d sup over B(x,r); the smallest observed ratio is a stable positive c
    cs = []
    for seed in (3, 4):
        vals = []
        for p, x in _battery(seed, 30):
            d = p.degree
            for s in (0.5, 0.1):
                vals.append(sup_ball(p, x, s, count=1024) / (s ** d * sup_ball(p, x, 1.0, count=1024)))
        cs.append(min(vals))
    assert min(cs) > 0
    assert max(cs) / min(cs) < 5


def test_balance_on_zero_set():
    ratios = []
    for p, x in _battery(5, 40):
        a, b = sup_pos(p, x, 0.5, count=1024), sup_neg(p, x, 0.5, count=1024)
        ratios.append(max(a / b, b / a))
    assert np.isfinite(ratios).all() and max(ratios) < 50


def test_change_of_scales_bounded():
    upper, lower = [], []
    for p, x in _battery(6, 30):
        d = p.degree
        z1 = zeta_hat(p, x, 1.0, 1, count=1024).value
        if not np.isfinite(z1) or z1 == 0:
            continue
        for s in (0.5, 0.1):
            zs = zeta_hat(p, x, s, 1, count=1024).value
            upper.append(zs / (s * z1))
            lower.append(s ** d * z1 / zs)
    assert max(upper) < 20 and max(lower) < 20


def test_zeta_continuity():
    p = catalog.szulkin()
    x = project_to_zero_set(p, [0.3, 0.2, 0.1])
    base = zeta_hat(p, x, 0.5, 1).value
    q = p + MultiPoly(3, {(1, 0, 0): 1e-6})
    for val in (
        zeta_hat(q, x, 0.5, 1).value,
        zeta_hat(p, x + 1e-6, 0.5, 1).value,
        zeta_hat(p, x, 0.5 + 1e-6, 1).value,
    ):
        assert abs(val - base) <= 1e-3


def test_ball_sphere_l2_comparable():
    rng = np.random.default_rng(7)
    ratios = []
    for _ in range(50):
        p = random_harmonic(3, int(rng.integers(1, 5)), rng, zero_constant=True)
        ratios.append(l2_inner_ball(p, p) / l2_inner_sphere(p, p))
    ratios = np.array(ratios)
    # for zero-mean harmonic p the ratio lies between 1/(2d+n) and 1/(2+n)
    assert ratios.min() >= 1 / (2 * 4 + 3) - 1e-12
    assert ratios.max() <= 1 / 5 + 1e-12


def test_sup_sphere_homogeneous_scaling():
    p = catalog.re_zk(4)
    assert_allclose(sup_sphere(p), 1.0, rtol=1e-8)
    assert_allclose(sup_ball(p, None, 0.3), 0.3 ** 4, rtol=1e-8)
