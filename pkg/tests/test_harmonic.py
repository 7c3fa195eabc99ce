import math

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from harmzero.harmonic import (
    ball_monomial_integral,
    basis_dimension,
    harmonic_basis,
    harmonic_span,
    l2_inner_ball,
    l2_inner_sphere,
    laplacian_matrix,
    monomials,
    random_harmonic,
    sphere_monomial_integral,
    sphere_monomial_integral_df,
)
from harmzero.frequency import sup_sphere
from harmzero.poly import MultiPoly, height, laplacian


def test_sphere_integral_examples():
    assert_allclose(sphere_monomial_integral((0, 0, 0)), 4 * math.pi, rtol=1e-14)
    assert_allclose(sphere_monomial_integral((2, 0, 0)), 4 * math.pi / 3, rtol=1e-14)
    assert sphere_monomial_integral((1, 2, 0)) == 0.0
    assert sphere_monomial_integral((2, 2, 3)) == 0.0


def test_sphere_integral_two_routes_agree():
    for n in (1, 2, 3, 4, 5):
        for a in monomials(n, 6) + monomials(n, 8):
            assert abs(sphere_monomial_integral(a) - sphere_monomial_integral_df(a)) <= 1e-12 * max(
                1.0, sphere_monomial_integral_df(a)
            )


def test_sphere_integral_circle_by_quadrature():
    # independent oracle: trapezoid rule on the circle is exact for trig polynomials
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    for a in [(4, 2), (2, 0), (6, 6), (0, 8)]:
        want = np.mean(np.cos(t) ** a[0] * np.sin(t) ** a[1]) * 2 * np.pi
        assert_allclose(sphere_monomial_integral(a), want, rtol=1e-12)


def test_ball_integral_examples():
    assert_allclose(ball_monomial_integral((0, 0), 2, 1.0), math.pi, rtol=1e-14)
    assert_allclose(ball_monomial_integral((0, 0, 0), 3, 2.0), 32 * math.pi / 3, rtol=1e-14)
    assert ball_monomial_integral((1, 0), 2, 1.0) == 0.0


def test_inner_product_examples():
    one = MultiPoly.constant(3, 1.0)
    assert_allclose(l2_inner_sphere(one, one), 4 * math.pi, rtol=1e-14)
    x1 = MultiPoly.variable(2, 0)
    assert_allclose(l2_inner_sphere(x1, x1), math.pi, rtol=1e-14)
    p = harmonic_basis(3, 2).elements[0]
    q = harmonic_basis(3, 3).elements[1]
    assert abs(l2_inner_sphere(p, q)) < 1e-14


def test_inner_product_shifted_against_sympy():
    # integrate (x+1/2)^2 y^2 over the unit disc in polar coordinates
    r, t = sp.symbols("r t", positive=True)
    expr = (r * sp.cos(t) + sp.Rational(1, 2)) ** 2 * (r * sp.sin(t)) ** 2 * r
    want = float(sp.integrate(sp.integrate(expr, (t, 0, 2 * sp.pi)), (r, 0, 1)))
    f = MultiPoly(2, {(2, 2): 1.0})
    one = MultiPoly.constant(2, 1.0)
    assert_allclose(l2_inner_ball(f, one, [0.5, 0.0], 1.0), want, rtol=1e-12)


def test_basis_examples():
    b = harmonic_basis(2, 3)
    assert len(b) == 2
    re = MultiPoly(2, {(3, 0): 1.0, (1, 2): -3.0})
    im = MultiPoly(2, {(2, 1): 3.0, (0, 3): -1.0})
    for target in (re, im):
        # the orthogonal projection onto the span reproduces the target
        resid = target - sum((l2_inner_sphere(target, e) * e for e in b.elements), MultiPoly.zero(2))
        assert height(resid) < 1e-12
    assert len(harmonic_basis(3, 2)) == 5
    assert len(harmonic_basis(4, 2)) == 9


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("k", range(0, 7))
def test_basis_dimension_and_orthonormality(n, k):
    b = harmonic_basis(n, k)
    L = laplacian_matrix(n, k)
    rank = np.linalg.matrix_rank(L) if L.size else 0
    assert len(b) == basis_dimension(n, k) == len(monomials(n, k)) - rank
    assert np.abs(b.gram - np.eye(len(b))).max() <= 1e-8
    G = np.array([[l2_inner_sphere(e, f) for f in b.elements] for e in b.elements])
    assert np.abs(G - np.eye(len(b))).max() <= 1e-8
    for e in b.elements:
        assert height(laplacian(e)) <= 1e-10 * height(e)


def test_basis_homogeneity():
    rng = np.random.default_rng(0)
    for n, k in [(2, 4), (3, 3), (4, 2)]:
        for e in harmonic_basis(n, k).elements:
            for _ in range(50):
                lam = rng.uniform(0.1, 3)
                y = rng.standard_normal(n)
                assert_allclose(e(lam * y), lam ** k * e(y), rtol=1e-9, atol=1e-12)


def test_orthogonality_across_degrees():
    for n in (2, 3):
        for k in (1, 2, 3):
            for j in range(k + 1, 5):
                for e in harmonic_basis(n, k).elements:
                    for f in harmonic_basis(n, j).elements:
                        for r in (0.5, 1.0, 2.0):
                            ne = math.sqrt(l2_inner_sphere(e, e, None, r))
                            nf = math.sqrt(l2_inner_sphere(f, f, None, r))
                            assert abs(l2_inner_sphere(e, f, None, r)) <= 1e-8 * ne * nf


def test_span_coordinates_roundtrip():
    rng = np.random.default_rng(1)
    span = harmonic_span(3, 3)
    c = rng.standard_normal(span.dim)
    assert_allclose(span.coordinates(span.combine(c)), c, atol=1e-10)


def test_reverse_holder_on_spheres_bounded():
    rng = np.random.default_rng(2)
    ratios = []
    for _ in range(40):
        p = random_harmonic(3, 3, rng)
        l2 = math.sqrt(l2_inner_sphere(p, p) / (4 * math.pi))
        ratios.append(sup_sphere(p, count=2048) / l2)
    ratios = np.array(ratios)
    # sup dominates the mean-square norm; the reverse bound holds with a modest constant
    assert ratios.min() >= 1.0 - 1e-9
    assert ratios.max() < 10.0
