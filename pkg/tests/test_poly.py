import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from harmzero import catalog
from harmzero.frequency import sup_ball
from harmzero.poly import (
    MultiPoly,
    NotOnZeroSetError,
    PolynomialFormatError,
    evaluate,
    gradient,
    height,
    homogeneous_decomposition,
    is_harmonic,
    laplacian,
    loads,
    project_to_zero_set,
    taylor_shift,
    vanishing_order,
)


def random_poly(rng, n, d, nterms=8):
    terms = {}
    for _ in range(nterms):
        a = rng.multinomial(int(rng.integers(0, d + 1)), [1 / (n + 1)] * (n + 1))[:n]
        terms[tuple(a)] = rng.standard_normal()
    return MultiPoly(n, terms)


def to_sympy(p, xs):
    return sum(c * sp.prod([x ** a for x, a in zip(xs, alpha)]) for alpha, c in p.terms.items())


def test_eval_examples():
    assert MultiPoly(2, {(1, 1): 1.0})([2.0, 3.0]) == 6.0
    assert catalog.szulkin()([0, 0, 0]) == 0.0
    assert MultiPoly(2, {(2, 0): 1.0, (0, 2): -1.0})([1.0, 1.0]) == 0.0


def test_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        MultiPoly(2, {(1, 1): 1.0})([1.0, 2.0, 3.0])


def test_zero_polynomial_degree_and_pruning():
    p = MultiPoly(2, {(1, 0): 1.0})
    z = p - p
    assert z.is_zero() and z.degree == -1
    assert all(c != 0 for c in (p * 3.0).terms.values())


def test_eval_many_matches_scalar():
    rng = np.random.default_rng(1)
    p = random_poly(rng, 3, 5)
    X = rng.standard_normal((20, 3))
    assert_allclose(p.eval_many(X), [evaluate(p, x) for x in X], rtol=1e-12, atol=1e-12)


def test_laplacian_examples():
    x2my2 = MultiPoly(2, {(2, 0): 1.0, (0, 2): -1.0})
    assert laplacian(x2my2).is_zero()
    assert laplacian(MultiPoly(2, {(2, 0): 1.0, (0, 2): 1.0})) == MultiPoly.constant(2, 4.0)
    assert laplacian(catalog.szulkin()).is_zero()
    assert is_harmonic(catalog.szulkin())
    assert not is_harmonic(MultiPoly(2, {(2, 0): 1.0}))


def test_gradient_against_sympy():
    rng = np.random.default_rng(2)
    xs = sp.symbols("x0:3")
    for _ in range(5):
        p = random_poly(rng, 3, 4)
        e = to_sympy(p, xs)
        pt = rng.standard_normal(3)
        for i, g in enumerate(gradient(p)):
            want = float(sp.diff(e, xs[i]).subs(dict(zip(xs, pt))))
            assert_allclose(g(pt), want, rtol=1e-10, atol=1e-12)


def test_derivative_consistency_central_difference():
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(200):
        n = int(rng.integers(2, 5))
        p = random_poly(rng, n, int(rng.integers(1, 6)))
        x = rng.uniform(-1, 1, n)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        fd = (p(x + h * v) - p(x - h * v)) / (2 * h)
        g = np.array([gi(x) for gi in gradient(p)]) @ v
        scale = max(abs(g), np.abs([gi(x) for gi in gradient(p)]).max(), 1.0)
        assert abs(fd - g) <= 1e-6 * scale


def test_taylor_shift_cross_example():
    p = MultiPoly(2, {(1, 1): 1.0})
    dec = taylor_shift(p, [1.0, 0.0])
    assert dec.part(0).is_zero()
    assert dec.part(1) == MultiPoly(2, {(0, 1): 1.0})
    assert dec.part(2) == MultiPoly(2, {(1, 1): 1.0})


def test_taylor_shift_against_sympy():
    rng = np.random.default_rng(4)
    xs = sp.symbols("x0:3")
    ys = sp.symbols("y0:3")
    for _ in range(4):
        p = random_poly(rng, 3, 4)
        x0 = rng.uniform(-1, 1, 3)
        e = sp.expand(to_sympy(p, xs).subs({x: xi + y for x, xi, y in zip(xs, x0, ys)}))
        poly = sp.Poly(e, *ys)
        got = taylor_shift(p, x0).total()
        want = {tuple(m): float(c) for m, c in zip(poly.monoms(), poly.coeffs())}
        scale = max(abs(c) for c in want.values())
        for a in set(want) | set(got.terms):
            assert abs(got.terms.get(a, 0.0) - want.get(a, 0.0)) <= 1e-12 * scale


def test_taylor_shift_identity_and_homogeneous():
    rng = np.random.default_rng(5)
    p = random_poly(rng, 3, 4)
    assert taylor_shift(p, [0, 0, 0]).parts == homogeneous_decomposition(p).parts
    s = catalog.szulkin()
    dec = taylor_shift(s, [0, 0, 0])
    assert [not q.is_zero() for q in dec.parts] == [False, False, False, True]


def test_homdecomp_invariants():
    rng = np.random.default_rng(6)
    for _ in range(10):
        p = random_poly(rng, 3, 5)
        x0 = rng.uniform(-1, 1, 3)
        dec = taylor_shift(p, x0)
        Y = rng.standard_normal((16, 3))
        lhs = p.eval_many(x0 + Y)
        rhs = sum(q.eval_many(Y) for q in dec.parts)
        assert_allclose(rhs, lhs, rtol=1e-10, atol=1e-10 * np.abs(lhs).max())
        lam = 1.7
        for i, q in enumerate(dec.parts):
            assert_allclose(q.eval_many(lam * Y), lam ** i * q.eval_many(Y), rtol=1e-10, atol=1e-12)


def test_taylor_shift_composition():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = random_poly(rng, 3, 5)
        a, b = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        two = taylor_shift(taylor_shift(p, a).total(), b).total()
        one = taylor_shift(p, a + b).total()
        assert two.allclose(one, rtol=1e-9)


def test_height_examples():
    assert height(MultiPoly(2, {(1, 1): 1.0})) == 1.0
    assert height(MultiPoly(2, {(3, 0): 1.0, (1, 2): -3.0})) == 3.0
    rng = np.random.default_rng(8)
    p = random_poly(rng, 3, 4)
    assert height(p / height(p)) == pytest.approx(1.0)


def test_vanishing_order_examples():
    cross = MultiPoly(2, {(1, 1): 1.0})
    assert vanishing_order(cross, [0.0, 0.0]) == 2
    assert vanishing_order(cross, [1.0, 0.0]) == 1
    assert vanishing_order(catalog.szulkin(), [0.0, 0.0, 0.0]) == 3


def test_vanishing_order_errors():
    with pytest.raises(NotOnZeroSetError):
        vanishing_order(MultiPoly(2, {(1, 1): 1.0}), [1.0, 1.0])
    with pytest.raises(ValueError):
        vanishing_order(MultiPoly.zero(2), [0.0, 0.0])


def test_project_to_zero_set():
    s = catalog.szulkin()
    x = project_to_zero_set(s, [0.4, 0.1, 0.3])
    assert abs(s(x)) < 1e-14
    assert vanishing_order(s, x) == 1


def test_scale_and_compose():
    rng = np.random.default_rng(9)
    p = random_poly(rng, 3, 4)
    y = rng.standard_normal(3)
    assert_allclose(p.scale_args(0.3)(y), p(0.3 * y), rtol=1e-12)
    M = rng.standard_normal((3, 3))
    assert_allclose(p.compose_linear(M)(y), p(M @ y), rtol=1e-10)


def test_json_roundtrip_canonical():
    p = catalog.szulkin()
    q = loads(p.to_json())
    assert q == p
    degs = [sum(t["exp"]) for t in json.loads(p.to_json())["terms"]]
    assert degs == sorted(degs)


@pytest.mark.parametrize(
    "text, where",
    [
        ('{"n": 2, "terms": [', "line 1"),
        ('{"terms": []}', "'n'"),
        ('{"n": 2, "terms": [{"exp": [1], "coef": 1}]}', "terms[0].exp"),
        ('{"n": 2, "terms": [{"exp": [1, 0], "coef": "a"}]}', "terms[0].coef"),
        ('{"n": 9, "terms": []}', "n:"),
    ],
)
def test_json_errors_report_position(text, where):
    with pytest.raises(PolynomialFormatError, match=__import__("re").escape(where)):
        loads(text)


def _height_sup_ratios(seed):
    rng = np.random.default_rng(seed)
    out = {}
    for _ in range(200):
        n = int(rng.integers(1, 4))
        d = int(rng.integers(1, 6))
        p = random_poly(rng, n, d)
        if p.is_zero():
            continue
        out.setdefault((n, p.degree), []).append(height(p) / sup_ball(p, None, 1.0, count=1024))
    return out


def test_height_sup_comparison_bounded():
    # H(p) and the sup over the unit ball are comparable with (n, d) constants
    for seed in (10, 11):
        for key, ratios in _height_sup_ratios(seed).items():
            r = np.array(ratios)
            assert np.all(np.isfinite(r)) and r.min() > 0
            n, d = key
            # |p| <= sum |c_a| <= C(n+d, d) H on the ball
            assert r.min() >= 1.0 / math.comb(n + d, d) - 1e-12


def test_parts_sup_comparison_bounded():
    rng = np.random.default_rng(12)
    ratios = []
    for _ in range(60):
        p = random_poly(rng, 2, 4)
        if p.is_zero():
            continue
        parts = homogeneous_decomposition(p).parts
        ratios.append(sum(height(q) for q in parts) / sup_ball(p, None, 1.0, count=1024))
    ratios = np.array(ratios)
    assert np.all(np.isfinite(ratios)) and ratios.min() > 0.1 and ratios.max() < 1e3


@settings(max_examples=60, deadline=None)
@given(
    coefs=st.lists(st.floats(-5, 5, allow_nan=False), min_size=6, max_size=6),
    x0=st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=2),
)
def test_shift_reproduces_values(coefs, x0):
    exps = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 3)]
    p = MultiPoly(2, dict(zip(exps, coefs)))
    y = np.array([0.3, -0.7])
    dec = taylor_shift(p, x0)
    want = p(np.array(x0) + y)
    got = sum(q(y) for q in dec.parts)
    assert abs(got - want) <= 1e-9 * (1 + sum(abs(c) for c in coefs) * 50)
