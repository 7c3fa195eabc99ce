"""Sparse real multivariate polynomials.

A :class:`MultiPoly` maps exponent multi-indices to float coefficients.  All
operations are exact formulas evaluated in float64; nothing is truncated
except coefficients below the pruning threshold ``PRUNE_REL * H(p)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE_REL = 1e-14
MAX_DIM = 6


class PolynomialFormatError(ValueError):
    """Malformed polynomial record; the message carries the offending position."""


class NotOnZeroSetError(ValueError):
    pass


def grlex_key(alpha: Sequence[int]):
    # total degree ascending, then x1 > x2 > ... within a degree
    return (sum(alpha), tuple(-a for a in alpha))


def _prune(terms: dict, rel: float = PRUNE_REL) -> dict:
    if not terms:
        return terms
    h = max(abs(c) for c in terms.values())
    cut = rel * h
    return {a: c for a, c in terms.items() if abs(c) > cut}


class MultiPoly:
    """Immutable sparse polynomial in ``n`` real variables.

    >>> p = MultiPoly(2, {(1, 1): 1.0})
    >>> p([2.0, 3.0])
    6.0
    """

    __slots__ = ("n", "terms", "__dict__")

    def __init__(self, n: int, terms: Mapping[Sequence[int], float] | None = None):
        if n < 1:
            raise ValueError("dimension must be positive")
        if n > MAX_DIM:
            raise ValueError(f"dimension {n} exceeds supported maximum {MAX_DIM}")
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n or min(alpha) < 0:
                raise ValueError(f"bad multi-index {alpha} for n={n}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self.n = n
        self.terms = {a: clean[a] for a in sorted(clean, key=grlex_key) if clean[a] != 0.0}

    # construction helpers
    @classmethod
    def zero(cls, n: int) -> "MultiPoly":
        return cls(n)

    @classmethod
    def constant(cls, n: int, c: float) -> "MultiPoly":
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> "MultiPoly":
        alpha = [0] * n
        alpha[i] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def linear(cls, coeffs: Sequence[float]) -> "MultiPoly":
        n = len(coeffs)
        return cls(n, {tuple(int(i == j) for j in range(n)): c for i, c in enumerate(coeffs)})

    # basic properties
    @property
    def degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(a) for a in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    @cached_property
    def exponents(self) -> np.ndarray:
        if not self.terms:
            return np.zeros((0, self.n), dtype=np.int64)
        return np.array(list(self.terms), dtype=np.int64)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return np.array(list(self.terms.values()), dtype=float)

    def __repr__(self) -> str:
        if not self.terms:
            return f"MultiPoly({self.n}, 0)"
        parts = []
        for alpha, c in self.terms.items():
            mono = "*".join(
                f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(alpha) if a
            )
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return f"MultiPoly({self.n}, {' '.join(parts)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiPoly) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, tuple(self.terms.items())))

    def allclose(self, other: "MultiPoly", rtol: float = 1e-9, atol: float = 0.0) -> bool:
        if self.n != other.n:
            return False
        scale = max(height(self), height(other), 1e-300)
        keys = set(self.terms) | set(other.terms)
        return all(
            abs(self.terms.get(a, 0.0) - other.terms.get(a, 0.0)) <= atol + rtol * scale
            for a in keys
        )

    # arithmetic
    def _check(self, other: "MultiPoly"):
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.n, other)
        self._check(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0.0) + c
        return MultiPoly(self.n, _prune(out))

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.n, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            other = float(other)
            return MultiPoly(self.n, {a: c * other for a, c in self.terms.items()})
        self._check(other)
        acc: dict = {}
        for a, c in self.terms.items():
            for b, e in other.terms.items():
                g = tuple(x + y for x, y in zip(a, b))
                acc.setdefault(g, []).append(c * e)
        return MultiPoly(self.n, _prune({g: math.fsum(v) for g, v in acc.items()}))

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return self * (1.0 / float(other))

    def __pow__(self, k: int):
        out = MultiPoly.constant(self.n, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    # evaluation
    def __call__(self, x) -> float:
        return evaluate(self, x)

    def eval_many(self, X) -> np.ndarray:
        """Vectorised evaluation at the rows of ``X`` (shape ``(m, n)``)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n:
            raise ValueError(f"dimension mismatch: points have {X.shape[1]} columns, p.n={self.n}")
        if not self.terms:
            return np.zeros(X.shape[0])
        d = self.degree
        # powers[:, i, k] = X[:, i] ** k by repeated multiplication
        powers = np.empty((X.shape[0], self.n, d + 1))
        powers[:, :, 0] = 1.0
        for k in range(1, d + 1):
            powers[:, :, k] = powers[:, :, k - 1] * X
        E = self.exponents
        mono = powers[:, 0, E[:, 0]]
        for i in range(1, self.n):
            mono = mono * powers[:, i, E[:, i]]
        return mono @ self.coefficients

    # calculus
    def derivative(self, i: int) -> "MultiPoly":
        out = {}
        for a, c in self.terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = c * a[i]
        return MultiPoly(self.n, out)

    @cached_property
    def _gradient(self) -> tuple:
        return tuple(self.derivative(i) for i in range(self.n))

    def homogeneous_part(self, i: int) -> "MultiPoly":
        return MultiPoly(self.n, {a: c for a, c in self.terms.items() if sum(a) == i})

    def scale_args(self, r: float) -> "MultiPoly":
        """``y -> p(r * y)``."""
        return MultiPoly(self.n, {a: c * r ** sum(a) for a, c in self.terms.items()})

    def compose_linear(self, M) -> "MultiPoly":
        """``y -> p(M @ y)`` for an ``(n, m)`` matrix ``M``; result has ``m`` variables."""
        M = np.asarray(M, dtype=float)
        if M.shape[0] != self.n:
            raise ValueError("matrix rows must equal p.n")
        m = M.shape[1]
        rows = [MultiPoly(m, {tuple(int(j == k) for k in range(m)): M[i, j] for j in range(m)})
                for i in range(self.n)]
        out = MultiPoly.zero(m)
        for a, c in self.terms.items():
            term = MultiPoly.constant(m, c)
            for i, ai in enumerate(a):
                if ai:
                    term = term * rows[i] ** ai
            out = out + term
        return out

    def dense_tensor(self, degree: int | None = None) -> np.ndarray:
        """Coefficients as a dense array of shape ``(d+1,)*n``."""
        d = self.degree if degree is None else degree
        T = np.zeros((max(d, 0) + 1,) * self.n)
        for a, c in self.terms.items():
            T[a] = c
        return T

    def to_dict(self) -> dict:
        return {"n": self.n, "terms": [{"exp": list(a), "coef": c} for a, c in self.terms.items()]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, rec) -> "MultiPoly":
        return parse_record(rec)


@dataclass(frozen=True)
class HomDecomp:
    """Homogeneous parts ``parts[i]`` of a polynomial, ``i = 0..d``."""

    parts: tuple

    @property
    def n(self) -> int:
        return self.parts[0].n

    @property
    def degree(self) -> int:
        for i in range(len(self.parts) - 1, -1, -1):
            if not self.parts[i].is_zero():
                return i
        return -1

    def part(self, i: int) -> MultiPoly:
        if 0 <= i < len(self.parts):
            return self.parts[i]
        return MultiPoly.zero(self.n)

    def total(self) -> MultiPoly:
        out = MultiPoly.zero(self.n)
        for q in self.parts:
            out = out + q
        return out

    def low_order(self, k: int, start: int = 1) -> MultiPoly:
        """Sum of parts ``start..k``."""
        out = MultiPoly.zero(self.n)
        for i in range(start, min(k, len(self.parts) - 1) + 1):
            out = out + self.parts[i]
        return out


# ----------------------------------------------------------------------------
# operations

def evaluate(p: MultiPoly, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != p.n:
        raise ValueError(f"dimension mismatch: len(x)={x.shape[0]}, p.n={p.n}")
    vals = []
    for a, c in p.terms.items():
        v = c
        for xi, ai in zip(x, a):
            if ai:
                v *= xi ** ai
        vals.append(v)
    return math.fsum(vals)


def gradient(p: MultiPoly) -> list:
    return list(p._gradient)


def grad_many(p: MultiPoly, X) -> np.ndarray:
    return np.stack([g.eval_many(X) for g in p._gradient], axis=-1)


def laplacian(p: MultiPoly) -> MultiPoly:
    out = MultiPoly.zero(p.n)
    for i in range(p.n):
        out = out + p.derivative(i).derivative(i)
    return out


def height(p: MultiPoly) -> float:
    if not p.terms:
        return 0.0
    return float(max(abs(c) for c in p.terms.values()))


def is_harmonic(p: MultiPoly, tol: float = 1e-10) -> bool:
    L = laplacian(p)
    h = height(p)
    return all(abs(c) <= tol * h for c in L.terms.values())


def homogeneous_decomposition(p: MultiPoly) -> HomDecomp:
    d = max(p.degree, 0)
    return HomDecomp(tuple(p.homogeneous_part(i) for i in range(d + 1)))


def _sub_indices(alpha):
    return itertools.product(*(range(a + 1) for a in alpha))


def taylor_shift(p: MultiPoly, x0) -> HomDecomp:
    """Homogeneous parts of ``y -> p(x0 + y)`` by exact binomial expansion."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape[0] != p.n:
        raise ValueError(f"dimension mismatch: len(x0)={x0.shape[0]}, p.n={p.n}")
    if not np.any(x0):
        return homogeneous_decomposition(p)
    acc: dict = {}
    for alpha, c in p.terms.items():
        for beta in _sub_indices(alpha):
            w = c
            for a, b, xi in zip(alpha, beta, x0):
                if a > b:
                    w *= math.comb(a, b) * xi ** (a - b)
            if w != 0.0:
                acc.setdefault(beta, []).append(w)
    shifted = MultiPoly(p.n, _prune({b: math.fsum(v) for b, v in acc.items()}))
    return homogeneous_decomposition(shifted)


def shifted(p: MultiPoly, x0) -> MultiPoly:
    """``y -> p(x0 + y)`` as a single polynomial."""
    return taylor_shift(p, x0).total()


def local_poly(p: MultiPoly, x0, r: float) -> MultiPoly:
    """``y -> p(x0 + r*y)``: the polynomial seen in the unit frame of ``B(x0, r)``."""
    return shifted(p, x0).scale_args(r)


def taylor_coefficient_polys(p: MultiPoly) -> dict:
    """Map ``beta -> D_beta`` with ``D_beta(x)`` the coefficient of ``y^beta`` in ``p(x+y)``."""
    out: dict = {}
    for alpha, c in p.terms.items():
        for beta in _sub_indices(alpha):
            gamma = tuple(a - b for a, b in zip(alpha, beta))
            w = c
            for a, b in zip(alpha, beta):
                w *= math.comb(a, b)
            out.setdefault(beta, {})
            out[beta][gamma] = out[beta].get(gamma, 0.0) + w
    return {b: MultiPoly(p.n, t) for b, t in sorted(out.items(), key=lambda kv: grlex_key(kv[0]))}


def vanishing_order(p: MultiPoly, x, tol: float = 1e-9, zero_tol: float | None = None) -> int:
    """Order to which ``p`` vanishes at ``x`` (the stratum index of ``x``)."""
    h = height(p)
    if h == 0.0:
        raise ValueError("p vanishes identically")
    zero_tol = tol if zero_tol is None else zero_tol
    dec = taylor_shift(p, x)
    if abs(dec.part(0).terms.get((0,) * p.n, 0.0)) > zero_tol * h:
        raise NotOnZeroSetError(f"|p(x)| = {abs(evaluate(p, x)):.3g} exceeds {zero_tol * h:.3g}")
    for k in range(1, len(dec.parts)):
        if height(dec.parts[k]) > tol * h:
            return k
    raise ValueError("p vanishes identically near x")


def project_to_zero_set(p: MultiPoly, x, steps: int = 60, tol: float = 1e-15) -> np.ndarray:
    """Newton steps along the gradient until ``|p(x)|`` stops decreasing."""
    x = np.array(x, dtype=float)
    grads = gradient(p)
    for _ in range(steps):
        v = evaluate(p, x)
        if abs(v) <= tol * max(height(p), 1.0):
            break
        g = np.array([evaluate(gi, x) for gi in grads])
        gg = g @ g
        if gg == 0.0:
            break
        x = x - v * g / gg
    return x


# ----------------------------------------------------------------------------
# canonical text format

def parse_record(rec) -> MultiPoly:
    if not isinstance(rec, dict):
        raise PolynomialFormatError("top level: expected an object with fields 'n' and 'terms'")
    if "n" not in rec:
        raise PolynomialFormatError("top level: missing field 'n'")
    n = rec["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise PolynomialFormatError(f"n: expected a positive integer, got {n!r}")
    if n > MAX_DIM:
        raise PolynomialFormatError(f"n: dimension {n} exceeds supported maximum {MAX_DIM}")
    terms = rec.get("terms")
    if not isinstance(terms, list):
        raise PolynomialFormatError("terms: expected a list")
    out = {}
    for i, t in enumerate(terms):
        if not isinstance(t, dict) or "exp" not in t or "coef" not in t:
            raise PolynomialFormatError(f"terms[{i}]: expected an object with 'exp' and 'coef'")
        e = t["exp"]
        if (not isinstance(e, list) or len(e) != n
                or not all(isinstance(a, int) and not isinstance(a, bool) and a >= 0 for a in e)):
            raise PolynomialFormatError(f"terms[{i}].exp: expected {n} nonnegative integers, got {e!r}")
        c = t["coef"]
        if not isinstance(c, (int, float)) or isinstance(c, bool) or not math.isfinite(c):
            raise PolynomialFormatError(f"terms[{i}].coef: expected a finite real, got {c!r}")
        key = tuple(e)
        out[key] = out.get(key, 0.0) + float(c)
    return MultiPoly(n, out)


def loads(text: str) -> MultiPoly:
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolynomialFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_record(rec)


def load(path) -> MultiPoly:
    with open(path) as fh:
        text = fh.read()
    try:
        return loads(text)
    except PolynomialFormatError as exc:
        raise PolynomialFormatError(f"{path}: {exc}") from None


def dumps(p: MultiPoly) -> str:
    return json.dumps(p.to_dict(), indent=1)


def dump(p: MultiPoly, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(p) + "\n")


def from_terms(n: int, pairs: Iterable) -> MultiPoly:
    """Build from ``(coef, exponents)`` pairs."""
    return MultiPoly(n, {tuple(e): c for c, e in pairs})
