"""Quantitative symmetry of harmonic polynomials.

The normalized blowup at ``x`` and scale ``r`` is

    T(y) = (p(x + r y) - p(x)) / sqrt(mean over |z| = 1 of (p(x + r z) - p(x))^2),

and its defect against k-symmetric functions is the smallest ball-averaged
squared distance to a homogeneous harmonic polynomial P with unit sphere
average ``mean(P^2) = 1`` that is invariant under translations along some
k-plane.  Because the homogeneous parts of a harmonic T are orthogonal on every
sphere, for each degree j the best P is the normalized projection of the
degree-j part of T, which gives a closed form.  For k >= 1 the minimum over
k-planes is searched numerically and the result is an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .harmonic import harmonic_basis, l2_inner_ball, l2_inner_sphere, sphere_area
from .poly import MultiPoly, homogeneous_decomposition, local_poly

__all__ = ["SymmetryResult", "normalized_blowup", "symmetry_defect", "symmetric_defect_direct",
           "NormalizationError"]


class NormalizationError(ValueError):
    pass


def normalized_blowup(p: MultiPoly, x, r: float, tol: float = 1e-9) -> MultiPoly:
    x = np.asarray(x, dtype=float)
    p0 = p(x)
    if abs(p0) > tol * max(1.0, float(np.abs(p.coefficients).max())):
        raise ValueError(f"x is not on the zero set (p(x) = {p0:.3g})")
    q = local_poly(p, x, r) - MultiPoly.constant(p.n, p0)
    avg = l2_inner_sphere(q, q) / sphere_area(p.n)
    if not avg > 0:
        raise NormalizationError("p is constant on the sphere; the blowup is undefined")
    return q / math.sqrt(avg)


class _Degree:
    """Data for one degree j: the sphere-averaged orthonormal coordinates of
    the degree-j part of T and the matrices of the partial derivatives."""

    def __init__(self, T_j: MultiPoly, n: int, j: int):
        B = harmonic_basis(n, j)
        area = sphere_area(n)
        # mean-normalized basis: e_i * sqrt(area)
        self.coef = B.coeffs * math.sqrt(area)
        idx = {tuple(e): i for i, e in enumerate(B.exps.tolist())}
        vec = np.zeros(len(B.exps))
        for e, c in T_j.terms.items():
            vec[idx[e]] = c
        self.t = np.linalg.lstsq(self.coef, vec, rcond=None)[0]
        self.j = j
        self.c = n / (2 * j + n)
        # d/dx_l maps monomial coefficients of degree j to degree j - 1
        if j == 0:
            self.M = [np.zeros((0, len(self.t))) for _ in range(n)]
            return
        lower = harmonic_basis(n, j - 1).exps.tolist()
        li = {tuple(e): i for i, e in enumerate(lower)}
        mats = []
        for l in range(n):
            D = np.zeros((len(lower), len(B.exps)))
            for col, e in enumerate(B.exps.tolist()):
                if e[l]:
                    f = list(e)
                    f[l] -= 1
                    D[li[tuple(f)], col] = e[l]
            mats.append(D @ self.coef)
        self.M = mats

    def projected_norm(self, V: np.ndarray | None) -> float:
        """Sphere-average norm of the projection of T_j onto the members of
        F_{n,j} invariant along the columns of V."""
        if V is None or V.shape[1] == 0:
            return float(np.linalg.norm(self.t))
        A = np.vstack([sum(V[l, i] * self.M[l] for l in range(V.shape[0])) for i in range(V.shape[1])])
        if A.shape[0] == 0:
            return float(np.linalg.norm(self.t))
        _, s, vt = np.linalg.svd(A)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if len(s) else 1.0)))
        K = vt[rank:].T
        return float(np.linalg.norm(K.T @ self.t))


@dataclass
class SymmetryResult:
    defect: float
    k: int
    degree: int
    frame: np.ndarray | None
    per_degree: dict
    exact: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"defect": self.defect, "k": self.k, "degree": self.degree, "exact": self.exact,
                "frame": None if self.frame is None else self.frame.tolist(),
                "per_degree": {str(j): v for j, v in self.per_degree.items()}, **self.diagnostics}


def _defect(parts, ball_T2, V):
    vals = {}
    for D in parts:
        vals[D.j] = ball_T2 - 2 * D.c * D.projected_norm(V) + D.c
    return vals


def _sphere_grid(step_deg: float) -> np.ndarray:
    """Unit vectors on the upper hemisphere of S^2 at a fixed angular step."""
    out = []
    step = math.radians(step_deg)
    for th in np.arange(0.0, math.pi / 2 + 1e-12, step):
        m = max(1, int(round(2 * math.pi * math.sin(th) / step)))
        for ph in np.arange(m) * (2 * math.pi / m):
            out.append((math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)))
    return np.array(out)


def _frame(z: np.ndarray, n: int, k: int) -> np.ndarray:
    Q, _ = np.linalg.qr(z.reshape(n, k))
    return Q


def symmetry_defect(p: MultiPoly, x, r: float, k: int = 0, sweep_deg: float = 2.0,
                    n_frames: int = 200, seed: int = 0, full_output: bool = False):
    """Defect of the normalized blowup from k-symmetric homogeneous harmonics.

    Exact for ``k = 0``.  For ``k >= 1`` the infimum over k-planes is replaced
    by a search (a hemisphere sweep for lines in R^3, random frames otherwise,
    each polished by Nelder-Mead), so the value is an upper bound.
    """
    n = p.n
    if not 0 <= k <= n:
        raise ValueError("k must lie in 0..n")
    T = normalized_blowup(p, x, r)
    ball_T2 = l2_inner_ball(T, T) / (sphere_area(n) / n)
    dec = homogeneous_decomposition(T)
    parts = [_Degree(dec.part(j), n, j) for j in range(1, dec.degree + 1)]
    diag = {}
    if k == 0:
        vals = _defect(parts, ball_T2, None)
        frame = None
    elif k == n:
        # only constants are invariant along all of R^n, so every projection vanishes
        vals = _defect(parts, ball_T2, np.eye(n))
        frame = np.eye(n)
    else:
        def objective(z):
            return min(_defect(parts, ball_T2, _frame(z, n, k)).values())

        if n == 3 and k == 1:
            starts = _sphere_grid(sweep_deg)
        else:
            rng = np.random.default_rng(seed)
            starts = rng.standard_normal((n_frames, n * k))
        scores = np.array([objective(z) for z in starts])
        order = np.argsort(scores)[:5]
        best_z, best = starts[order[0]], scores[order[0]]
        for i in order:
            res = minimize(objective, starts[i], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
            if res.fun < best:
                best_z, best = res.x, float(res.fun)
        frame = _frame(np.asarray(best_z), n, k)
        vals = _defect(parts, ball_T2, frame)
        diag = {"frames_scanned": len(starts), "sweep_best": float(scores.min())}
    j = min(vals, key=vals.get)
    # clip tiny negative rounding
    d = max(vals[j], 0.0)
    res = SymmetryResult(d, k, j, frame, vals, k == 0, diag)
    return res if full_output else res.defect


def symmetric_defect_direct(p: MultiPoly, x, r: float, degree: int, frame=None) -> float:
    """Independent route: build the optimal P explicitly and integrate
    ``mean over B of (T - P)^2`` with exact monomial integrals."""
    n = p.n
    T = normalized_blowup(p, x, r)
    Tj = homogeneous_decomposition(T).part(degree)
    D = _Degree(Tj, n, degree)
    if frame is None or np.asarray(frame).shape[1] == 0:
        K = np.eye(len(D.t))
    else:
        V = np.asarray(frame, dtype=float)
        A = np.vstack([sum(V[l, i] * D.M[l] for l in range(n)) for i in range(V.shape[1])])
        _, s, vt = np.linalg.svd(A)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if len(s) else 1.0)))
        K = vt[rank:].T
    u = K @ (K.T @ D.t)
    nu = np.linalg.norm(u)
    if nu == 0:
        # any unit member of the invariant span is optimal
        if K.shape[1] == 0:
            return float("inf")
        u = K[:, 0]
        nu = 1.0
    coeff = D.coef @ (u / nu)
    B = harmonic_basis(n, degree)
    P = MultiPoly(n, {tuple(e): c for e, c in zip(B.exps.tolist(), coeff)})
    E = T - P
    return l2_inner_ball(E, E) / (sphere_area(n) / n)
