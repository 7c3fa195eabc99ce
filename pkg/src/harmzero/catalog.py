"""Named polynomials used as examples, test batteries and calibration corpora."""

from __future__ import annotations

import math

import numpy as np

from .poly import MultiPoly


def linear(n: int = 2) -> MultiPoly:
    """``x1``: a hyperplane."""
    return MultiPoly.variable(n, 0)


def cross(n: int = 2) -> MultiPoly:
    """``x1 x2``; singular along ``{x1 = x2 = 0}``."""
    a = [0] * n
    a[0] = a[1] = 1
    return MultiPoly(n, {tuple(a): 1.0})


def triple_cross() -> MultiPoly:
    """``x1 x2 x3`` in R^3: three coordinate planes."""
    return MultiPoly(3, {(1, 1, 1): 1.0})


def re_zk(k: int, angle: float = 0.0) -> MultiPoly:
    """``Re((e^{i angle}(x + i y))^k)``: k lines through the origin."""
    re, im = {}, {}
    for j in range(k + 1):
        c = math.comb(k, j)
        # i^j splits into real (j even) and imaginary (j odd) parts
        if j % 2 == 0:
            re[(k - j, j)] = c * (-1) ** (j // 2)
        else:
            im[(k - j, j)] = c * (-1) ** ((j - 1) // 2)
    ck, sk = math.cos(k * angle), math.sin(k * angle)
    terms = {a: ck * v for a, v in re.items()}
    for a, v in im.items():
        terms[a] = terms.get(a, 0.0) - sk * v
    return MultiPoly(2, terms)


def szulkin() -> MultiPoly:
    """``x^3 - 3xy^2 + z^3 - (3/2)(x^2 + y^2) z``; its zero set splits R^3 in two."""
    return MultiPoly(3, {(3, 0, 0): 1.0, (1, 2, 0): -3.0, (0, 0, 3): 1.0,
                         (2, 0, 1): -1.5, (0, 2, 1): -1.5})


def logunov_malinnikova() -> MultiPoly:
    """``x^2 - y^2 + z^3 - 3x^2 z``."""
    return MultiPoly(3, {(2, 0, 0): 1.0, (0, 2, 0): -1.0, (0, 0, 3): 1.0, (2, 0, 1): -3.0})


def two_plane_quadric() -> MultiPoly:
    """``Re(z1^2) + Re(z2^2)`` in coordinates ``(x1, y1, x2, y2)`` of R^4."""
    return MultiPoly(4, {(2, 0, 0, 0): 1.0, (0, 2, 0, 0): -1.0,
                         (0, 0, 2, 0): 1.0, (0, 0, 0, 2): -1.0})


def rotation(n: int, rng) -> np.ndarray:
    """Haar-random orthogonal matrix."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def rotated(p: MultiPoly, Q) -> MultiPoly:
    """``y -> p(Q^T y)``: the zero set is rotated by Q."""
    return p.compose_linear(np.asarray(Q).T)


NAMED = {
    "linear2": lambda: linear(2),
    "linear3": lambda: linear(3),
    "cross2": lambda: cross(2),
    "cross3": lambda: cross(3),
    "triple_cross": triple_cross,
    "re_z1": lambda: re_zk(1),
    "re_z2": lambda: re_zk(2),
    "re_z3": lambda: re_zk(3),
    "re_z4": lambda: re_zk(4),
    "re_z5": lambda: re_zk(5),
    "szulkin": szulkin,
    "logunov_malinnikova": logunov_malinnikova,
    "two_plane_quadric": two_plane_quadric,
}


def named(name: str) -> MultiPoly:
    try:
        return NAMED[name]()
    except KeyError:
        raise KeyError(f"unknown polynomial {name!r}; choose from {sorted(NAMED)}") from None
