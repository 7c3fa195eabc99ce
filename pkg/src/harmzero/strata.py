"""Stratification of sampled zero sets, covering numbers and tube volumes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .frequency import DEFAULT_SEED, zeta_hat_batch
from .harmonic import ball_volume
from .poly import MultiPoly, grad_many, gradient
from .theta import StrataLabel, ThetaOptions, detect_degree
from .zeroset import (
    DEFAULT_MAX_VERTICES,
    PointCloud,
    effective_pitch,
    grid_axes,
    iter_slabs,
    sample_zero_set,
)

__all__ = [
    "StrataLabel", "stratify", "stratum_cloud", "covering_number", "mdim_estimate", "MdimFit",
    "tube_volume", "tube_slope", "singular_set_sample", "EmptyZeroSetError",
]


class EmptyZeroSetError(ValueError):
    pass


# ----------------------------------------------------------------------------
# stratification

def derivative_labels(p: MultiPoly, X, rho: float) -> tuple:
    """Smallest k whose Taylor part of order <= k dominates the higher parts at
    scale ``rho`` (zeta-hat below 1), or ``deg p`` when none does."""
    d = p.degree
    labels = np.full(len(X), d, dtype=int)
    values = np.full(len(X), np.nan)
    open_ = np.ones(len(X), dtype=bool)
    for k in range(1, d):
        if not open_.any():
            break
        idx = np.nonzero(open_)[0]
        z = zeta_hat_batch(p, X[idx], rho, k)
        hit = z < 1.0
        labels[idx[hit]] = k
        values[idx[hit]] = z[hit]
        open_[idx[hit]] = False
    return labels, values


def stratify(p: MultiPoly, center, radius: float, h: float, scales=None, cross_check: int = 40,
             calibration=None, opts: ThetaOptions | None = None, seed: int = DEFAULT_SEED,
             cloud: PointCloud | None = None,
             max_vertices: int = DEFAULT_MAX_VERTICES) -> tuple:
    """Label every sample of the zero set in ``B(center, radius)`` by degree.

    Primary labels come from the derivative test at scale ``2h``.  A fixed
    subsample of ``cross_check`` points is relabelled by :func:`detect_degree`
    and the agreement is recorded on those labels.  Returns ``(cloud, labels)``.
    A precomputed ``cloud`` skips the sampling step.
    """
    if cloud is None:
        cloud = sample_zero_set(p, center, radius, h, max_vertices=max_vertices)
    if not len(cloud):
        raise EmptyZeroSetError("the zero set does not meet the region")
    rho = 2 * h
    k, z = derivative_labels(p, cloud.points, rho)
    labels = [
        StrataLabel(cloud.points[i], int(k[i]),
                    {"criterion": "derivative-test", "k": int(k[i]), "r": rho,
                     "value": None if np.isnan(z[i]) else float(z[i])})
        for i in range(len(cloud))
    ]
    if cross_check and scales is not None:
        rng = np.random.default_rng(seed)
        # include every point above the bottom stratum, then fill from the rest
        top = np.nonzero(k > 1)[0]
        rest = np.nonzero(k == 1)[0]
        m = min(cross_check, len(cloud))
        pick = list(rng.permutation(top)[: m // 2]) if len(top) else []
        pick += list(rng.permutation(rest)[: m - len(pick)])
        for i in sorted(pick):
            lab = detect_degree(p, cloud.points[i], scales, calibration=calibration, opts=opts)
            labels[i].trace = [{"cross_label": lab.k, "unresolved": lab.unresolved,
                                "certificate": lab.certificate}]
            labels[i].certificate["agrees"] = bool(lab.k == labels[i].k and not lab.unresolved)
    return cloud, labels


def stratum_cloud(cloud: PointCloud, labels, k: int) -> PointCloud:
    mask = np.array([lab.k == k for lab in labels], dtype=bool)
    return cloud.subset(mask)


# ----------------------------------------------------------------------------
# covering numbers and Minkowski dimension

def covering_number(A, s: float, seed: int | None = None) -> int:
    """Greedy number of radius-s balls centred in A needed to cover A."""
    P = A.points if isinstance(A, PointCloud) else np.asarray(A, dtype=float)
    if not len(P):
        raise ValueError("empty set")
    order = np.arange(len(P)) if seed is None else np.random.default_rng(seed).permutation(len(P))
    tree = cKDTree(P)
    covered = np.zeros(len(P), dtype=bool)
    count = 0
    for i in order:
        if covered[i]:
            continue
        count += 1
        covered[tree.query_ball_point(P[i], s)] = True
    return count


@dataclass
class MdimFit:
    slope: float
    intercept: float
    residual: float
    scales: list
    counts: list
    dropped: list = field(default_factory=list)


def _fit(s, N):
    x = np.log(1.0 / np.asarray(s))
    y = np.log(np.asarray(N, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.abs(y - (slope * x + icpt)).max())
    return float(slope), float(icpt), res


def mdim_estimate(A, s_list) -> MdimFit:
    """Least-squares slope of ``log N(A, s)`` against ``log(1/s)``.  The coarsest
    scale is dropped once when the worst residual exceeds 0.05."""
    s = sorted(float(v) for v in s_list)
    if len(s) < 3:
        raise ValueError("need at least 3 scales for a dimension fit")
    counts = [covering_number(A, v) for v in s]
    slope, icpt, res = _fit(s, counts)
    dropped = []
    if res > 0.05 and len(s) > 3:
        dropped = [s[-1]]
        slope, icpt, res = _fit(s[:-1], counts[:-1])
    return MdimFit(slope, icpt, res, s, counts, dropped)


# ----------------------------------------------------------------------------
# tube volumes

def _uniform_ball(rng, N: int, n: int, R: float) -> np.ndarray:
    z = rng.standard_normal((N, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * R * rng.random((N, 1)) ** (1.0 / n)


def _newton_foot(p: MultiPoly, Y: np.ndarray, steps: int = 6) -> np.ndarray:
    """Points of the zero set reached from Y by gradient Newton steps."""
    Z = Y.copy()
    for _ in range(steps):
        v = p.eval_many(Z)
        g = grad_many(p, Z)
        gg = np.einsum("ij,ij->i", g, g)
        ok = gg > 0
        Z[ok] -= (v[ok] / gg[ok])[:, None] * g[ok]
    return Z


def _tangent_foot(p: MultiPoly, Y: np.ndarray, Z: np.ndarray, steps: int = 3) -> np.ndarray:
    """Slide a zero-set point Z towards the orthogonal foot of Y: project the
    displacement onto the tangent plane, then Newton back onto the set."""
    for _ in range(steps):
        g = grad_many(p, Z)
        gg = np.einsum("ij,ij->i", g, g)
        ok = gg > 0
        D = Y - Z
        D[ok] -= (np.einsum("ij,ij->i", D[ok], g[ok]) / gg[ok])[:, None] * g[ok]
        Z = _newton_foot(p, Z + D, steps=3)
    return Z


def singular_set_sample(p: MultiPoly, center, radius: float, h: float, g0: float = 1.0,
                        f0: float = 0.5, max_vertices: int = DEFAULT_MAX_VERTICES,
                        gn_steps: int = 60, tol: float = 1e-10,
                        densify: int = 2) -> np.ndarray:
    """Sample of ``{p = 0, grad p = 0}``: grid vertices inside the bands
    ``|grad p| <= g0 h`` and ``|p| <= f0 h^2``, pulled onto the set by
    Gauss-Newton on ``(p, grad p)`` and kept when the residual vanishes."""
    n = p.n
    center = np.asarray(center, dtype=float)
    hh = effective_pitch(n, radius, h, max_vertices)
    axes = grid_axes(center, radius, hh)
    grads = gradient(p)
    cand = []
    m0 = len(axes[0])
    for start, V in iter_slabs(p, axes, overlap=0):
        rows = V.shape[0]
        sl = [axes[0][start:start + rows]] + list(axes[1:])
        mask = np.abs(V) <= f0 * hh * hh
        if not mask.any():
            continue
        idx = np.nonzero(mask)
        P = np.stack([sl[i][idx[i]] for i in range(n)], axis=1)
        G = np.stack([g.eval_many(P) for g in grads], axis=1)
        P = P[np.linalg.norm(G, axis=1) <= g0 * hh]
        cand.append(P)
        if start + rows >= m0:
            break
    P = np.vstack(cand) if cand else np.zeros((0, n))
    if not len(P):
        return P
    hess = [[gi.derivative(j) for j in range(n)] for gi in grads]

    def newton(P):
        for _ in range(gn_steps):
            F = np.concatenate([p.eval_many(P)[:, None], grad_many(p, P)], axis=1)
            J = np.empty((len(P), n + 1, n))
            J[:, 0, :] = F[:, 1:]
            for i in range(n):
                for j in range(n):
                    J[:, i + 1, j] = hess[i][j].eval_many(P)
            # batched least squares through the pseudo-inverse of each small Jacobian
            P = P - np.einsum("mij,mj->mi", np.linalg.pinv(J, rcond=1e-12), F)
        F = np.concatenate([p.eval_many(P)[:, None], grad_many(p, P)], axis=1)
        keep = (np.linalg.norm(F, axis=1) <= tol) & (np.linalg.norm(P - center, axis=1) <= radius + hh)
        return P[keep]

    P = newton(P)
    # fill the gaps between converged grid seeds by re-solving from jittered copies
    rng = np.random.default_rng(0)
    for _ in range(densify):
        if not len(P):
            break
        J = np.repeat(P, 4, axis=0) + 0.5 * hh * rng.standard_normal((4 * len(P), n))
        P = np.vstack([P, newton(J)])
    return P


def tube_volume(p: MultiPoly, r_list, mode: str = "zero-set", seed: int = DEFAULT_SEED,
                N: int = 1_000_000, region: float = 0.5, h: float | None = None,
                bands=None, max_vertices: int = DEFAULT_MAX_VERTICES) -> list:
    """Monte Carlo volume of ``{y in B(0, region) : dist(y, S) <= r}`` for the
    zero set (``mode="zero-set"``) or the singular set (``"singular-set"``).

    Returns rows ``(r, volume, standard_error)``.
    """
    n = p.n
    r_list = sorted(float(r) for r in r_list)
    rmax = r_list[-1]
    rng = np.random.default_rng(seed)
    Y = _uniform_ball(rng, N, n, region)
    R = region + rmax + 0.05
    h = h if h is not None else effective_pitch(n, R, 0.01, max_vertices)
    if mode == "zero-set":
        S = sample_zero_set(p, np.zeros(n), R, h, max_vertices=max_vertices).points
        if not len(S):
            return [(r, 0.0, 0.0) for r in r_list]
        dist = cKDTree(S).query(Y, distance_upper_bound=rmax + 2 * h)[0]
        near = np.nonzero(dist <= rmax + 2 * h)[0]
        if len(near):
            Z = _newton_foot(p, Y[near])
            Z = _tangent_foot(p, Y[near], Z)
            on = np.abs(p.eval_many(Z)) <= 1e-9 * max(1.0, np.abs(p.coefficients).max())
            dn = np.where(on, np.linalg.norm(Y[near] - Z, axis=1), np.inf)
            dist[near] = np.minimum(dist[near], dn)
    elif mode == "singular-set":
        if p.degree < 2:
            raise ValueError("singular-set mode needs degree >= 2")
        b = bands or {"g0": 1.0, "f0": 0.5}
        S = singular_set_sample(p, np.zeros(n), R, h, b["g0"], b["f0"], max_vertices)
        if not len(S):
            return [(r, 0.0, 0.0) for r in r_list]
        dist = cKDTree(S).query(Y, distance_upper_bound=rmax * 1.01)[0]
    else:
        raise ValueError("mode must be 'zero-set' or 'singular-set'")
    vol = ball_volume(n, region)
    out = []
    for r in r_list:
        f = float(np.mean(dist <= r))
        out.append((r, f * vol, vol * math.sqrt(f * (1 - f) / N)))
    return out


def tube_slope(rows) -> float:
    r = np.array([row[0] for row in rows])
    v = np.array([row[1] for row in rows])
    ok = v > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(r[ok]), np.log(v[ok]), 1)[0])
