"""Exact monomial integrals and orthonormal bases of homogeneous harmonics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space
from scipy.special import gammaln

from .poly import MultiPoly, grlex_key, shifted


# ----------------------------------------------------------------------------
# monomial integrals

def sphere_monomial_integral(alpha, n: int | None = None) -> float:
    """Integral of ``x^alpha`` over the unit sphere in R^n."""
    alpha = tuple(int(a) for a in alpha)
    n = len(alpha) if n is None else n
    if len(alpha) != n:
        raise ValueError("len(alpha) must equal n")
    if any(a % 2 for a in alpha):
        return 0.0
    s = sum(gammaln((a + 1) / 2.0) for a in alpha) - gammaln((sum(alpha) + n) / 2.0)
    return 2.0 * math.exp(s)


def _gamma_half(m: int) -> float:
    """Gamma(m/2) for a positive integer m, by the double-factorial recurrence."""
    if m % 2 == 0:
        return float(math.factorial(m // 2 - 1))
    # Gamma(j + 1/2) = (2j-1)!! sqrt(pi) / 2^j with m = 2j + 1
    j = (m - 1) // 2
    df = 1
    for t in range(2 * j - 1, 0, -2):
        df *= t
    return df * math.sqrt(math.pi) / 2.0 ** j


def sphere_monomial_integral_df(alpha, n: int | None = None) -> float:
    """Same quantity as :func:`sphere_monomial_integral` via double factorials."""
    alpha = tuple(int(a) for a in alpha)
    n = len(alpha) if n is None else n
    if any(a % 2 for a in alpha):
        return 0.0
    num = 1.0
    for a in alpha:
        num *= _gamma_half(a + 1)
    return 2.0 * num / _gamma_half(sum(alpha) + n)


def ball_monomial_integral(alpha, n: int | None = None, r: float = 1.0) -> float:
    alpha = tuple(int(a) for a in alpha)
    n = len(alpha) if n is None else n
    m = sum(alpha) + n
    return r ** m / m * sphere_monomial_integral(alpha, n)


def sphere_moments(G: np.ndarray) -> np.ndarray:
    """Vectorised unit-sphere integrals for an array of exponents ``G[..., n]``."""
    G = np.asarray(G)
    n = G.shape[-1]
    even = np.all(G % 2 == 0, axis=-1)
    logv = gammaln((G + 1) / 2.0).sum(axis=-1) - gammaln((G.sum(axis=-1) + n) / 2.0)
    return np.where(even, 2.0 * np.exp(np.where(even, logv, 0.0)), 0.0)


def _pair_moments(p: MultiPoly, q: MultiPoly):
    """Return (degrees, weights) with the sphere integral of ``p q`` at radius r
    equal to ``sum(weights * r**(degrees + n - 1))``."""
    if p.is_zero() or q.is_zero():
        return np.zeros(0, dtype=int), np.zeros(0)
    Ep, Eq = p.exponents, q.exponents
    G = Ep[:, None, :] + Eq[None, :, :]
    W = np.outer(p.coefficients, q.coefficients) * sphere_moments(G)
    deg = G.sum(axis=-1)
    degs = np.unique(deg)
    out = np.array([math.fsum(W[deg == m]) for m in degs])
    return degs, out


def sphere_profile(p: MultiPoly, q: MultiPoly | None = None):
    """Coefficients ``w_m`` with ``int_{|y|=r} p q = sum_m w_m r^(m+n-1)``."""
    return _pair_moments(p, p if q is None else q)


def l2_inner_sphere(p: MultiPoly, q: MultiPoly, x0=None, r: float = 1.0) -> float:
    """Exact ``int_{dB(x0,r)} p q dsigma``."""
    if p.n != q.n:
        raise ValueError("dimension mismatch")
    if x0 is not None and np.any(x0):
        p, q = shifted(p, x0), shifted(q, x0)
    degs, w = _pair_moments(p, q)
    return math.fsum(w * float(r) ** (degs + p.n - 1))


def l2_inner_ball(p: MultiPoly, q: MultiPoly, x0=None, r: float = 1.0) -> float:
    """Exact ``int_{B(x0,r)} p q dx``."""
    if p.n != q.n:
        raise ValueError("dimension mismatch")
    if x0 is not None and np.any(x0):
        p, q = shifted(p, x0), shifted(q, x0)
    degs, w = _pair_moments(p, q)
    m = degs + p.n
    return math.fsum(w * float(r) ** m / m)


def sphere_area(n: int, r: float = 1.0) -> float:
    return sphere_monomial_integral((0,) * n) * r ** (n - 1)


def ball_volume(n: int, r: float = 1.0) -> float:
    return sphere_monomial_integral((0,) * n) * r ** n / n


# ----------------------------------------------------------------------------
# harmonic bases

def basis_dimension(n: int, k: int) -> int:
    """Dimension of the space of k-homogeneous harmonic polynomials in R^n."""
    a = math.comb(n + k - 1, n - 1)
    b = math.comb(n + k - 3, n - 1) if k >= 2 else 0
    return a - b


def monomials(n: int, k: int) -> list:
    """Exponents of degree exactly ``k`` in graded-lex order."""
    out = [a for a in itertools.product(range(k + 1), repeat=n) if sum(a) == k]
    return sorted(out, key=grlex_key)


def laplacian_matrix(n: int, k: int) -> np.ndarray:
    """Integer matrix of the Laplacian from degree-k to degree-(k-2) forms."""
    cols = monomials(n, k)
    if k < 2:
        return np.zeros((0, len(cols)))
    rows = {b: i for i, b in enumerate(monomials(n, k - 2))}
    L = np.zeros((len(rows), len(cols)))
    for j, a in enumerate(cols):
        for i in range(n):
            if a[i] >= 2:
                b = list(a)
                b[i] -= 2
                L[rows[tuple(b)], j] += a[i] * (a[i] - 1)
    return L


def sphere_gram(E: np.ndarray) -> np.ndarray:
    """Sphere inner-product matrix between the monomials with exponents ``E``."""
    return sphere_moments(E[:, None, :] + E[None, :, :])


def _gram_schmidt(V: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Classical Gram-Schmidt of the columns of V in ``<u,v> = u^T M v``, twice."""
    Q = []
    for j in range(V.shape[1]):
        v = V[:, j].copy()
        for _ in range(2):
            for q in Q:
                v -= (q @ M @ v) * q
        nrm = math.sqrt(max(v @ M @ v, 0.0))
        if nrm > 1e-12:
            Q.append(v / nrm)
    return np.array(Q).T


@dataclass(frozen=True)
class HarmonicBasis:
    """Orthonormal basis (unit-sphere L^2) of k-homogeneous harmonics in R^n.

    ``coeffs[:, i]`` holds the coefficients of ``elements[i]`` in the monomials
    listed by ``exps``.
    """

    n: int
    k: int
    exps: np.ndarray
    coeffs: np.ndarray
    elements: tuple = field(repr=False)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def gram(self) -> np.ndarray:
        M = sphere_gram(self.exps)
        return self.coeffs.T @ M @ self.coeffs

    def combine(self, c) -> MultiPoly:
        c = np.asarray(c, dtype=float)
        v = self.coeffs @ c
        return MultiPoly(self.n, {tuple(a): x for a, x in zip(self.exps.tolist(), v)})


@lru_cache(maxsize=None)
def harmonic_basis(n: int, k: int) -> HarmonicBasis:
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    exps = np.array(monomials(n, k), dtype=np.int64)
    L = laplacian_matrix(n, k)
    if L.shape[0] == 0:
        V = np.eye(len(exps))
    else:
        scale = np.linalg.norm(L, axis=0)
        scale[scale == 0] = 1.0
        V = null_space(L / scale, rcond=1e-10) / scale[:, None]
    Q = _gram_schmidt(V, sphere_gram(exps))
    elems = tuple(
        MultiPoly(n, {tuple(a): x for a, x in zip(exps.tolist(), Q[:, i])}) for i in range(Q.shape[1])
    )
    return HarmonicBasis(n, k, exps, Q, elems)


@dataclass(frozen=True)
class HarmonicSpan:
    """Concatenation of the bases of degrees ``1..k``: a chart for the search
    space of nonconstant harmonic polynomials of degree at most k with p(0)=0."""

    n: int
    k: int
    bases: tuple

    @property
    def dim(self) -> int:
        return sum(len(b) for b in self.bases)

    def combine(self, c) -> MultiPoly:
        c = np.asarray(c, dtype=float)
        out, i = MultiPoly.zero(self.n), 0
        for b in self.bases:
            out = out + b.combine(c[i:i + len(b)])
            i += len(b)
        return out

    def coordinates(self, p: MultiPoly) -> np.ndarray:
        """Coefficients of the orthogonal projection of ``p`` onto the span."""
        out = []
        for b in self.bases:
            for e in b.elements:
                out.append(l2_inner_sphere(p, e))
        return np.array(out)


@lru_cache(maxsize=None)
def harmonic_span(n: int, k: int) -> HarmonicSpan:
    return HarmonicSpan(n, k, tuple(harmonic_basis(n, j) for j in range(1, k + 1)))


def random_homogeneous_harmonic(n: int, k: int, rng) -> MultiPoly:
    b = harmonic_basis(n, k)
    return b.combine(rng.standard_normal(len(b)))


def random_harmonic(n: int, d: int, rng, zero_constant: bool = False) -> MultiPoly:
    """Random harmonic polynomial of exact degree ``d``; Gaussian coefficients
    in the orthonormal bases of each degree."""
    out = MultiPoly.zero(n) if zero_constant else MultiPoly.constant(n, rng.standard_normal())
    for j in range(1, d + 1):
        out = out + random_homogeneous_harmonic(n, j, rng)
    return out
