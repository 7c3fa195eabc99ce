"""Bilateral approximation numbers and the degree detector.

All measurements are made in the unit frame of the ball: for a polynomial
``p`` and a ball ``B(x, r)`` we work with ``y -> p(x + r y)`` on ``B(0, 1)``,
so the pitch ``h`` is relative to ``r`` and the sampling floor of a reported
theta is about ``2 h``.

Target sets are sampled in ``B(0, 1 + margin)``.  Since the unrestricted
excess over a set containing the origin never exceeds 1, a reported value
``<= margin`` is unaffected by the truncation; larger values are upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .frequency import DEFAULT_SEED, zeta_hat
from .harmonic import harmonic_span
from .poly import MultiPoly, height, taylor_shift
from .zeroset import (
    DEFAULT_MAX_VERTICES,
    PointCloud,
    check_budget,
    effective_pitch,
    grid_axes,
    grid_values,
    rescale_cloud,
    restrict,
    sample_zero_set,
    walkup_wets,
)


@dataclass
class ThetaOptions:
    h: float = 0.01                 # relative pitch of the final measurement
    margin: float = 0.25            # targets sampled in B(0, 1 + margin)
    max_vertices: int = DEFAULT_MAX_VERTICES
    coarse_h: float = 0.04          # pitch used inside the optimizer
    coarse_max_vertices: int = 400_000
    restarts: int | None = None     # default 8 * k * n
    maxiter: int = 300
    seed: int = DEFAULT_SEED
    finalists: int = 3              # coarse minima re-measured at the fine pitch

    def pitch(self, n: int) -> float:
        return effective_pitch(n, 1 + self.margin, self.h, self.max_vertices)

    def floor(self, n: int) -> float:
        return 2 * self.pitch(n)


@dataclass
class ThetaReport:
    k: int
    x: np.ndarray
    scales: list
    theta: list = field(default_factory=list)
    approximant: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x"] = np.asarray(self.x).tolist()
        d["approximant"] = [None if a is None else np.asarray(a).tolist() for a in self.approximant]
        return d


def _normalized(q: MultiPoly) -> MultiPoly:
    h = height(q)
    return q / h if h > 0 else q


def _clamp(t: float) -> float:
    return float(min(max(t, 0.0), 1.0))


# ----------------------------------------------------------------------------
# upper bound from the Taylor approximant

def theta_upper_taylor(p: MultiPoly, x, r: float, k: int, h: float = 0.01, margin: float = 0.25,
                       max_vertices: int = DEFAULT_MAX_VERTICES, full_output: bool = False):
    """Distance in ``B(x, r)`` between the zero set of p and that of its Taylor
    part of orders 1..k at x.  Returns ``(theta, p_tilde)`` with ``p_tilde`` a
    polynomial in the displacement ``y = z - x``; ``(1.0, None)`` when that
    part vanishes identically."""
    x = np.asarray(x, dtype=float)
    dec = taylor_shift(p, x)
    ptil = dec.low_order(k, start=1)
    n = p.n
    R = 1.0 + margin
    hh = effective_pitch(n, R, h, max_vertices)
    info = {"pitch": hh, "floor": 2 * hh}
    if ptil.is_zero():
        return (1.0, None, info) if full_output else (1.0, None)
    pr = _normalized(dec.total().scale_args(r))
    qr = _normalized(ptil.scale_args(r))
    A = sample_zero_set(pr, np.zeros(n), R, hh, max_vertices=max_vertices)
    B = sample_zero_set(qr, np.zeros(n), R, hh, max_vertices=max_vertices)
    info.update(samples=(len(A), len(B)))
    if not len(restrict(A, np.zeros(n), 1.0)) and not len(restrict(B, np.zeros(n), 1.0)):
        theta = 1.0
    elif not len(A) or not len(B):
        theta = 1.0
    else:
        theta = _clamp(walkup_wets(A, B, np.zeros(n), 1.0))
    return (theta, ptil, info) if full_output else (theta, ptil)


# ----------------------------------------------------------------------------
# bilateral approximation over the harmonic span of degrees 1..k

class _FamilyGrid:
    """Grid values of every basis element, so that the zero set of any
    combination can be sampled by a single contraction."""

    def __init__(self, span, R: float, h: float, max_vertices: int):
        n = span.n
        self.h = effective_pitch(n, R, h, max_vertices)
        self.axes = grid_axes(np.zeros(n), R, self.h)
        check_budget([len(a) for a in self.axes], max_vertices)
        elems = [e for b in span.bases for e in b.elements]
        self.G = np.stack([grid_values(e, self.axes) for e in elems])
        self.R = R
        self.n = n

    def sample(self, c) -> np.ndarray:
        V = np.tensordot(c, self.G, axes=1)
        pts = []
        zero = np.nonzero(V == 0)
        if len(zero[0]):
            pts.append(np.stack([self.axes[i][zero[i]] for i in range(self.n)], axis=1))
        for ax in range(self.n):
            lo_sl = [slice(None)] * self.n
            hi_sl = [slice(None)] * self.n
            lo_sl[ax] = slice(0, -1)
            hi_sl[ax] = slice(1, None)
            lo, hi = V[tuple(lo_sl)], V[tuple(hi_sl)]
            idx = np.nonzero(lo * hi < 0)
            if not len(idx[0]):
                continue
            fa, fb = lo[idx], hi[idx]
            P = np.stack([self.axes[i][idx[i]] for i in range(self.n)], axis=1)
            P[:, ax] += self.h * fa / (fa - fb)
            pts.append(P)
        if not pts:
            return np.zeros((0, self.n))
        P = np.vstack(pts)
        return P[np.einsum("ij,ij->i", P, P) <= self.R ** 2]


def _ww_unit(A_in: np.ndarray, tree_A: cKDTree, S: np.ndarray) -> float:
    """Walkup-Wets distance in B(0,1) between A and a sampled target S."""
    if not len(S):
        return 1.0
    e1 = float(cKDTree(S).query(A_in)[0].max()) if len(A_in) else 0.0
    S_in = S[np.einsum("ij,ij->i", S, S) <= 1.0]
    e2 = float(tree_A.query(S_in)[0].max()) if len(S_in) else 0.0
    return max(e1, e2)


def _unit(c):
    nc = np.linalg.norm(c)
    return c / nc if nc > 0 else c


def _canonical_sign(c):
    nz = np.nonzero(np.abs(c) > 1e-12)[0]
    if len(nz) and c[nz[0]] < 0:
        return -c
    return c


def _pca_seed(span, A_in):
    """Coefficients of the hyperplane through 0 best fitting the points."""
    c = np.zeros(span.dim)
    if len(A_in) >= span.n:
        _, _, vt = np.linalg.svd(A_in, full_matrices=False)
        normal = vt[-1]
        # the degree-1 basis is x_i / sqrt(|S|/n): coefficients are proportional to the normal
        c[: span.n] = normal
    return c


def theta_bilateral(A: PointCloud, x, r: float, k: int, opts: ThetaOptions | None = None,
                    seed_poly: MultiPoly | None = None) -> ThetaReport:
    """Minimise the Walkup-Wets distance in ``B(x, r)`` between A and the zero
    set of a harmonic polynomial of degree ``<= k`` vanishing at x.

    ``seed_poly`` (a polynomial in the displacement from x, e.g. a Taylor
    approximant) seeds half of the restarts.  The returned value is an upper
    bound on the infimum.
    """
    opts = opts or ThetaOptions()
    x = np.asarray(x, dtype=float)
    n = A.n
    span = harmonic_span(n, k)
    U = rescale_cloud(A, x, r)
    A_in = restrict(U, np.zeros(n), 1.0)
    if not len(A_in):
        raise ValueError("A has no points in the ball")
    tree_A = U.tree
    R = 1.0 + opts.margin
    fam = _FamilyGrid(span, R, opts.coarse_h, opts.coarse_max_vertices)
    rng = np.random.default_rng(opts.seed)
    restarts = opts.restarts if opts.restarts is not None else 8 * k * n
    seeds = []
    base = None
    if seed_poly is not None and not seed_poly.is_zero():
        base = _unit(span.coordinates(seed_poly.scale_args(r)))
    pca = _unit(_pca_seed(span, A_in))
    for i in range(restarts):
        if i % 2 == 1 and base is not None:
            seeds.append(_unit(base + 0.05 * (i // 2) / max(restarts, 1) * rng.standard_normal(span.dim)))
        elif i % 2 == 1 or (i == 0 and base is None):
            seeds.append(_unit(pca + 0.3 * rng.standard_normal(span.dim) * (i > 0)))
        else:
            seeds.append(_unit(rng.standard_normal(span.dim)))
    if base is not None:
        seeds[0] = base  # the seed itself, unperturbed

    evals = [0]

    def obj(c):
        evals[0] += 1
        c = _unit(c)
        if not np.any(c):
            return 1.0
        return _ww_unit(A_in, tree_A, fam.sample(c))

    found = []
    iters = 0
    for i, c0 in enumerate(seeds):
        m = span.dim
        simplex = np.vstack([c0] + [c0 + 0.2 * np.eye(m)[j] for j in range(m)])
        res = minimize(obj, c0, method="Nelder-Mead",
                       options={"maxiter": opts.maxiter, "initial_simplex": simplex,
                                "xatol": 1e-4, "fatol": 1e-4, "adaptive": m > 4})
        iters += int(res.nit)
        found.append((float(res.fun), i, _canonical_sign(_unit(res.x))))
    found.sort(key=lambda t: (t[0], t[1]))
    # re-measure the best few at the fine pitch
    hh = opts.pitch(n)
    finals = []
    for val, i, c in found[: opts.finalists]:
        q = _normalized(span.combine(c))
        S = sample_zero_set(q, np.zeros(n), R, hh, max_vertices=opts.max_vertices)
        fine = _ww_unit(A_in, tree_A, S.points)
        finals.append((fine, i, c, val))
    finals.sort(key=lambda t: (t[0], t[1]))
    fine, i, c, val = finals[0]
    rep = ThetaReport(k, x, [float(r)])
    rep.theta.append(_clamp(fine))
    rep.approximant.append(c)
    rep.diagnostics.append({
        "restarts": restarts, "iterations": iters, "evaluations": evals[0],
        "coarse_objective": val, "coarse_pitch": fam.h, "pitch": hh,
        "floor": 2 * max(hh, A.resolution / r), "best_restart": i,
        "exact_below": opts.margin,
    })
    return rep


def theta_bilateral_scales(A: PointCloud, x, scales, k: int, opts=None, seed_poly=None) -> ThetaReport:
    rep = ThetaReport(k, np.asarray(x, dtype=float), [float(s) for s in scales])
    for r in rep.scales:
        one = theta_bilateral(A, x, r, k, opts, seed_poly)
        rep.theta += one.theta
        rep.approximant += one.approximant
        rep.diagnostics += one.diagnostics
    return rep


def theta_profile_taylor(p: MultiPoly, x, scales, k: int, opts: ThetaOptions | None = None) -> ThetaReport:
    """Taylor upper bounds at several scales, packaged as a report."""
    opts = opts or ThetaOptions()
    rep = ThetaReport(k, np.asarray(x, dtype=float), [float(s) for s in scales])
    span = harmonic_span(p.n, k)
    for r in rep.scales:
        t, ptil, info = theta_upper_taylor(p, x, r, k, opts.h, opts.margin, opts.max_vertices,
                                           full_output=True)
        rep.theta.append(t)
        rep.approximant.append(None if ptil is None else
                               _canonical_sign(_unit(span.coordinates(ptil.scale_args(r)))))
        rep.diagnostics.append(info)
    return rep


# ----------------------------------------------------------------------------
# degree detection

@dataclass
class StrataLabel:
    """Degree label of one point with the certificate that produced it."""

    point: np.ndarray
    k: int | None
    certificate: dict | None = None
    unresolved: bool = False
    reason: str = ""
    decay: dict | None = None
    trace: list = field(default_factory=list)
    extrapolated: bool = False

    def to_dict(self) -> dict:
        return {
            "point": np.asarray(self.point).tolist(), "k": self.k,
            "certificate": self.certificate, "unresolved": self.unresolved,
            "reason": self.reason, "decay": self.decay, "trace": self.trace,
            "extrapolated": self.extrapolated,
        }


def _refined_scales(scales, zetas, finite_min: float, floor: float = 1e-8):
    """Extra scales below the finest tested one, ten times finer each time,
    stopping once zeta is predicted below ``finite_min`` or at ``floor``."""
    r = min(scales)
    z = zetas[int(np.argmin(scales))]
    out = []
    while r > floor * 10 and (not math.isfinite(z) or z > finite_min):
        r /= 10
        out.append(r)
        if math.isfinite(z):
            z /= 10  # zeta decays at least linearly in the scale
    return out


def detect_degree(inp, x, scales, k_max: int | None = None, calibration=None,
                  opts: ThetaOptions | None = None, decay: bool = True,
                  refine: bool = True) -> StrataLabel:
    """Smallest k whose measured approximation number falls below the
    calibrated threshold at some scale.

    For a polynomial the measurement is the Taylor upper bound; scales where
    the zeta-hat functional already rules out a small theta are skipped, and
    finer scales are added when zeta-hat is finite but nothing certified.
    For a point cloud the measurement is :func:`theta_bilateral`.
    """
    from .calibration import load_calibration

    cal = calibration if calibration is not None else load_calibration()
    opts = opts or ThetaOptions()
    x = np.asarray(x, dtype=float)
    scales = sorted((float(s) for s in scales), reverse=True)
    if isinstance(inp, MultiPoly):
        return _detect_poly(inp, x, scales, k_max, cal, opts, decay, refine)
    if isinstance(inp, PointCloud):
        return _detect_cloud(inp, x, scales, k_max, cal, opts)
    raise TypeError("input must be a MultiPoly or a PointCloud")


def _detect_poly(p, x, scales, k_max, cal, opts, do_decay, refine) -> StrataLabel:
    n, d = p.n, p.degree
    if d < 1:
        raise ValueError("p must be nonconstant")
    k_max = d if k_max is None else min(k_max, d)
    label = StrataLabel(x, None)
    floor = opts.floor(n)
    finite_zeta_ks = []
    for k in range(1, k_max + 1):
        if k >= d:
            # the Taylor part of orders 1..d reproduces p exactly
            label.k = k
            label.certificate = {"criterion": "exact-approximant", "k": k, "r": scales[0],
                                 "value": 0.0, "threshold": None}
            break
        delta, extrap = cal.delta(n, d, k)
        label.extrapolated |= extrap
        tested = list(scales)
        zetas = [zeta_hat(p, x, r, k).value for r in tested]
        if refine and any(math.isfinite(z) for z in zetas):
            extra = _refined_scales(tested, zetas, finite_min=0.1 * delta ** k)
            tested += extra
            zetas += [zeta_hat(p, x, r, k).value for r in extra]
        if any(math.isfinite(z) for z in zetas):
            finite_zeta_ks.append(k)
        cert = None
        for r, z in zip(tested, zetas):
            rec = {"k": k, "r": r, "zeta": z}
            if not math.isfinite(z):
                rec["skipped"] = "low-order part vanishes"
                label.trace.append(rec)
                continue
            if z >= 1.0 / delta:
                # a small theta would force zeta below 1/delta
                rec["skipped"] = "zeta precheck"
                label.trace.append(rec)
                continue
            theta, _ = theta_upper_taylor(p, x, r, k, opts.h, opts.margin, opts.max_vertices)
            rec["theta"] = theta
            label.trace.append(rec)
            if theta < delta:
                cert = {"criterion": "theta-test", "k": k, "r": r, "value": theta,
                        "threshold": delta, "zeta": z}
                break
        if cert is not None:
            label.k = k
            label.certificate = cert
            break
    if label.k is None:
        label.unresolved = True
        label.reason = "no degree certified at the tested scales"
        return label
    wrong_side = [j for j in finite_zeta_ks if j < label.k]
    if wrong_side:
        label.unresolved = True
        label.reason = (f"degree {label.k} certified but the low-order part of order {wrong_side[0]} "
                        "is nonzero; scale-limited")
    if do_decay and label.certificate["criterion"] == "theta-test":
        k, r = label.k, label.certificate["r"]
        t0 = label.certificate["value"]
        t1, _ = theta_upper_taylor(p, x, r / 10, k, opts.h, opts.margin, opts.max_vertices)
        bound = 1.5 * 10 ** (-1.0 / k)
        ratio = t1 / t0 if t0 > 0 else 0.0
        at_floor = t1 <= floor
        label.decay = {"r": r, "theta_r": t0, "theta_r10": t1, "ratio": ratio, "bound": bound,
                       "floor": floor, "at_floor": bool(at_floor),
                       "passed": bool(ratio <= bound or at_floor)}
    return label


def _detect_cloud(A, x, scales, k_max, cal, opts) -> StrataLabel:
    if k_max is None:
        raise ValueError("k_max is required for point-cloud input")
    n = A.n
    label = StrataLabel(x, None)
    for k in range(1, k_max + 1):
        # at k = k_max the relevant competitors are cones of degree k_max + 1
        delta, extrap = cal.delta(n, max(k_max, k + 1), k)
        label.extrapolated |= extrap
        for r in scales:
            rep = theta_bilateral(A, x, r, k, opts)
            theta = rep.theta[0]
            label.trace.append({"k": k, "r": r, "theta": theta,
                                "floor": rep.diagnostics[0]["floor"]})
            if theta < delta:
                label.k = k
                label.certificate = {"criterion": "theta-test", "k": k, "r": r, "value": theta,
                                     "threshold": delta,
                                     "approximant": np.asarray(rep.approximant[0]).tolist()}
                return label
    label.unresolved = True
    label.reason = "no degree certified at the tested scales"
    return label
