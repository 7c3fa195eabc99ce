"""Almgren frequency, doubling, sup norms on balls and the zeta-hat functional.

All L^2 quantities are exact: the polynomial is recentred, multiplied out and
integrated monomial by monomial.  Sup norms are sampled (scrambled Sobol
points plus a short projected-gradient polish) and are therefore lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import qmc
from scipy.special import ndtri

from .harmonic import _pair_moments, ball_volume
from .poly import MultiPoly, grad_many, height, local_poly, shifted, taylor_shift

INF = math.inf
DEFAULT_SEED = 20240611


class UndefinedFrequencyError(ValueError):
    pass


# ----------------------------------------------------------------------------
# frequency

def _energy_profiles(p: MultiPoly, x0):
    q = shifted(p, x0) if x0 is not None and np.any(x0) else p
    hd, hw = _pair_moments(q, q)
    dd, dw = [], []
    for i in range(q.n):
        g = q.derivative(i)
        a, b = _pair_moments(g, g)
        dd.append(a)
        dw.append(b)
    if dd:
        dd = np.concatenate(dd)
        dw = np.concatenate(dw)
    return q.n, (hd, hw), (np.asarray(dd, dtype=int), np.asarray(dw, dtype=float))


def _H(n, hp, r):
    d, w = hp
    return math.fsum(w * r ** (d + n - 1))


def _D(n, dp, r):
    d, w = dp
    m = d + n
    return math.fsum(w * r ** m / m)


def frequency(p: MultiPoly, x0, r: float) -> float:
    """``N = r D / H`` with ``H`` the sphere integral of p^2 and ``D`` the
    Dirichlet energy on the ball, both centred at ``x0``."""
    return frequency_profile(p, x0, [r]).N_vals[0]


@dataclass
class FrequencyProfile:
    x0: np.ndarray
    radii: list
    H_vals: list = field(default_factory=list)
    D_vals: list = field(default_factory=list)
    N_vals: list = field(default_factory=list)


def frequency_profile(p: MultiPoly, x0, radii) -> FrequencyProfile:
    x0 = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float)
    if p.is_zero():
        raise UndefinedFrequencyError("zero polynomial")
    n, hp, dp = _energy_profiles(p, x0)
    prof = FrequencyProfile(x0, [float(r) for r in radii])
    for r in prof.radii:
        if r <= 0:
            raise ValueError("radii must be positive")
        H = _H(n, hp, r)
        D = _D(n, dp, r)
        if not H > 0:
            raise UndefinedFrequencyError(f"p vanishes on the sphere of radius {r}")
        prof.H_vals.append(H)
        prof.D_vals.append(D)
        prof.N_vals.append(r * D / H)
    return prof


def frequency_by_parts(p: MultiPoly, x0, r: float) -> float:
    """Frequency of a harmonic ``p`` from the sphere norms of its recentred
    homogeneous parts: ``sum j w_j / sum w_j`` with ``w_j = r^(2j) |p_j|^2``.

    Independent of :func:`frequency`; agrees with it only for harmonic input.
    """
    dec = taylor_shift(p, x0)
    num, den = [], []
    for j, part in enumerate(dec.parts):
        d, w = _pair_moments(part, part)
        s = math.fsum(w) * r ** (2 * j)
        num.append(j * s)
        den.append(s)
    return math.fsum(num) / math.fsum(den)


def ball_average_sq(p: MultiPoly, x0, r: float) -> float:
    """Mean of p^2 over ``B(x0, r)`` (exact)."""
    q = shifted(p, x0) if np.any(x0) else p
    d, w = _pair_moments(q, q)
    m = d + p.n
    return math.fsum(w * r ** m / m) / ball_volume(p.n, r)


def doubling_check(p: MultiPoly, x0, r: float, R: float, exponent_offset: float = 0.0):
    """Both sides of the doubling inequality for ball averages of p^2.

    ``lhs = mean_{B(x0,2r)} p^2`` and
    ``rhs = 2^(2 N(R) + exponent_offset) * mean_{B(x0,r)} p^2``.

    With ``exponent_offset=0`` the inequality is sharp: a k-homogeneous
    polynomial centred at its vertex gives equality.  Negative offsets state a
    stronger inequality that homogeneous examples violate.
    """
    if not (0 < r < R / 2):
        raise ValueError("need 0 < r < R/2")
    x0 = np.asarray(x0, dtype=float)
    N = frequency(p, x0, R)
    lhs = ball_average_sq(p, x0, 2 * r)
    rhs = 2.0 ** (2 * N + exponent_offset) * ball_average_sq(p, x0, r)
    return lhs, rhs


# ----------------------------------------------------------------------------
# sup norms

@lru_cache(maxsize=32)
def _unit_samples(n: int, count: int, seed: int, where: str) -> np.ndarray:
    """Low-discrepancy points in the closed unit ball ("ball") or on the unit
    sphere ("sphere").  Normal directions come from the inverse normal CDF."""
    m = int(math.ceil(math.log2(max(count, 2))))
    eng = qmc.Sobol(d=n + 1, scramble=True, seed=seed)
    u = eng.random_base2(m)[:count]
    u = np.clip(u, 1e-12, 1 - 1e-12)
    z = ndtri(u[:, :n])
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    if where == "ball":
        z *= u[:, n:n + 1] ** (1.0 / n)
    z.setflags(write=False)
    return z


def unit_ball_points(n: int, count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    half = count // 2
    return np.vstack([_unit_samples(n, half, seed, "ball"),
                      _unit_samples(n, count - half, seed + 1, "sphere")])


@dataclass
class SupResult:
    value: float
    argmax: np.ndarray
    samples: int
    resolution: float


def _sample_resolution(n: int, count: int) -> float:
    # typical spacing of count quasi-uniform points in the unit ball
    return (ball_volume(n) / count) ** (1.0 / n)


def _polish(q: MultiPoly, X: np.ndarray, sgn: float, on_sphere: bool, steps: int) -> tuple:
    """Projected-gradient ascent of ``sgn * q`` from the rows of X."""
    best = sgn * q.eval_many(X)
    t = np.full(len(X), 0.1)
    for _ in range(steps):
        g = grad_many(q, X) * sgn
        if on_sphere:
            g -= np.sum(g * X, axis=1, keepdims=True) * X
        gn = np.linalg.norm(g, axis=1, keepdims=True)
        gn[gn == 0] = 1.0
        Y = X + t[:, None] * g / gn
        nr = np.linalg.norm(Y, axis=1, keepdims=True)
        if on_sphere:
            Y /= np.where(nr == 0, 1.0, nr)
        else:
            Y /= np.maximum(nr, 1.0)
        v = sgn * q.eval_many(Y)
        better = v > best
        X = np.where(better[:, None], Y, X)
        best = np.where(better, v, best)
        t = np.where(better, t, t / 2)
    i = int(np.argmax(best))
    return float(best[i]), X[i]


def _sup_unit(q: MultiPoly, mode: str, where: str, count: int | None, seed: int,
              polish: int = 20, top: int = 8) -> SupResult:
    n = q.n
    count = 4096 * n if count is None else count
    if q.is_zero():
        return SupResult(0.0, np.zeros(n), count, 0.0)
    if q.degree == 0:
        c = next(iter(q.terms.values()))
        v = {"abs": abs(c), "pos": max(c, 0.0), "neg": max(-c, 0.0)}[mode]
        return SupResult(v, np.zeros(n), count, 0.0)
    if where == "ball":
        P = unit_ball_points(n, count, seed)
    else:
        P = _unit_samples(n, count, seed, "sphere")
    vals = q.eval_many(P)
    results = []
    signs = {"abs": (1.0, -1.0), "pos": (1.0,), "neg": (-1.0,)}[mode]
    for s in signs:
        sv = s * vals
        idx = np.argsort(sv)[-top:]
        v, x = _polish(q, P[idx], s, where == "sphere", polish)
        results.append((v, x))
    v, x = max(results, key=lambda t: t[0])
    return SupResult(max(v, 0.0), x, count, _sample_resolution(n, count))


def sup_ball(p: MultiPoly, x0=None, r: float = 1.0, count: int | None = None,
             seed: int = DEFAULT_SEED, full_output: bool = False):
    """Sampled max of |p| over the closed ball ``B(x0, r)`` (a lower bound)."""
    x0 = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float)
    res = _sup_unit(local_poly(p, x0, r), "abs", "ball", count, seed)
    if full_output:
        res.argmax = x0 + r * res.argmax
        res.resolution *= r
        return res
    return res.value


def sup_pos(p: MultiPoly, x0=None, r: float = 1.0, count=None, seed: int = DEFAULT_SEED) -> float:
    x0 = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float)
    return _sup_unit(local_poly(p, x0, r), "pos", "ball", count, seed).value


def sup_neg(p: MultiPoly, x0=None, r: float = 1.0, count=None, seed: int = DEFAULT_SEED) -> float:
    x0 = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float)
    return _sup_unit(local_poly(p, x0, r), "neg", "ball", count, seed).value


def sup_sphere(q: MultiPoly, count=None, seed: int = DEFAULT_SEED) -> float:
    """Sampled max of |q| over the unit sphere."""
    return _sup_unit(q, "abs", "sphere", count, seed).value


# ----------------------------------------------------------------------------
# zeta hat

@dataclass(frozen=True)
class ZetaValue:
    k: int
    value: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)

    def __float__(self):
        return self.value


def zeta_hat(p: MultiPoly, x, r: float, k: int, count=None, seed: int = DEFAULT_SEED) -> ZetaValue:
    """Ratio of the largest high-order Taylor part at ``x`` to the part of
    order at most ``k``, sup norms over ``B(0, r)``.

    Numerators use homogeneity, ``sup_{B(0,r)} |p_j| = r^j sup_{S} |p_j|``.
    The denominator includes the constant term.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    dec = taylor_shift(p, x)
    d = dec.degree
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k >= d:
        return ZetaValue(k, 0.0)
    low = dec.low_order(k, start=0)
    den = sup_ball(low.scale_args(r), None, 1.0, count, seed)
    if den <= 1e-12 * height(p) * r:
        return ZetaValue(k, INF)
    num = max(r ** j * sup_sphere(dec.part(j), count, seed) for j in range(k + 1, d + 1))
    return ZetaValue(k, num / den)


def zeta_profile(p: MultiPoly, x, k: int, radii, **kw) -> list:
    return [zeta_hat(p, x, r, k, **kw).value for r in radii]


def _direction_set(n: int, count: int, seed: int) -> np.ndarray:
    return np.asarray(_unit_samples(n, count, seed, "sphere"))


def taylor_parts_on_directions(p: MultiPoly, X, U) -> np.ndarray:
    """Values ``P[m, j, u]`` of the degree-j Taylor part of p at ``X[m]`` in the
    unit directions ``U[u]``."""
    from .poly import taylor_coefficient_polys

    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = max(p.degree, 0)
    D = taylor_coefficient_polys(p)
    out = np.zeros((len(X), d + 1, len(U)))
    for beta, Dbeta in D.items():
        j = sum(beta)
        mono = np.prod(U ** np.asarray(beta)[None, :], axis=1)
        out[:, j, :] += Dbeta.eval_many(X)[:, None] * mono[None, :]
    return out


def zeta_hat_batch(p: MultiPoly, X, r: float, k: int, directions: int | None = None,
                   seed: int = DEFAULT_SEED, chunk: int = 2000) -> np.ndarray:
    """zeta-hat at many points for a harmonic p.

    Each Taylor part of a harmonic polynomial is harmonic, so by the maximum
    principle every sup over the ball is attained on the sphere; the sups are
    taken over a fixed set of sphere directions shared by all points.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = p.degree
    if k >= d:
        return np.zeros(len(X))
    U = _direction_set(p.n, directions or 1024 * p.n, seed)
    H = height(p)
    out = np.empty(len(X))
    pw = r ** np.arange(d + 1)
    for s in range(0, len(X), chunk):
        P = taylor_parts_on_directions(p, X[s:s + chunk], U)
        low = np.abs(np.einsum("mju,j->mu", P[:, : k + 1, :], pw[: k + 1])).max(axis=1)
        high = (np.abs(P[:, k + 1:, :]).max(axis=2) * pw[None, k + 1:]).max(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(low <= 1e-12 * H * r, INF, high / low)
        out[s:s + chunk] = z
    return out
