"""Seeded test batteries shared by the command line and the acceptance suite.

Each battery returns a list of flat row dicts (ready for CSV) and a summary
dict.  Everything random is drawn from ``numpy.random.default_rng(seed)`` in a
fixed order so a battery is a pure function of its arguments.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import catalog
from .frequency import DEFAULT_SEED, doubling_check, frequency, zeta_hat
from .harmonic import random_harmonic
from .poly import project_to_zero_set, vanishing_order
from .strata import tube_slope, tube_volume
from .theta import ThetaOptions, detect_degree, theta_upper_taylor
from .zeroset import sample_zero_set, walkup_wets

FREQUENCY_RADII = (0.1, 0.5, 1.0, 2.0)


def _ball_point(rng, n: int, R: float = 1.0) -> np.ndarray:
    v = rng.standard_normal(n)
    return R * v / np.linalg.norm(v) * rng.random() ** (1.0 / n)


# ----------------------------------------------------------------------------
# frequency bound and monotonicity

def frequency_battery(seed: int = DEFAULT_SEED, count: int = 500, radii=FREQUENCY_RADII):
    rng = np.random.default_rng(seed)
    rows = []
    worst_bound = -math.inf
    worst_mono = 0.0
    t0 = time.time()
    for i in range(count):
        n = int(rng.choice([2, 3]))
        d = int(rng.integers(1, 6))
        p = random_harmonic(n, d, rng)
        x0 = _ball_point(rng, n)
        N = [frequency(p, x0, r) for r in radii]
        excess = max(N) - p.degree
        mono = max([0.0] + [N[j] - N[j + 1] for j in range(len(N) - 1)])
        worst_bound = max(worst_bound, excess)
        worst_mono = max(worst_mono, mono)
        row = {"case": i, "n": n, "d": p.degree, "x0": ";".join(f"{v:.17g}" for v in x0)}
        row.update({f"N_{r:g}": v for r, v in zip(radii, N)})
        row.update({"max_excess": excess, "monotonicity_violation": mono})
        rows.append(row)
    summary = {"cases": count, "max_N_minus_d": worst_bound, "max_monotonicity_violation": worst_mono,
               "seconds": time.time() - t0}
    return rows, summary


# ----------------------------------------------------------------------------
# doubling

def doubling_battery(seed: int = DEFAULT_SEED, count: int = 100, exponent_offset: float = 0.0):
    """Random harmonic p, centre in B(0, 1), R in [0.5, 2], r in (0, R/2)."""
    rng = np.random.default_rng(seed)
    rows = []
    worst = -math.inf
    for i in range(count):
        n = int(rng.choice([2, 3]))
        d = int(rng.integers(1, 5))
        p = random_harmonic(n, d, rng)
        x0 = _ball_point(rng, n)
        R = float(rng.uniform(0.5, 2.0))
        r = float(rng.uniform(0.05, 0.95)) * R / 2
        lhs, rhs = doubling_check(p, x0, r, R, exponent_offset)
        rel = (lhs - rhs) / max(rhs, 1e-300)
        worst = max(worst, rel)
        rows.append({"case": i, "n": n, "d": p.degree, "r": r, "R": R, "lhs": lhs, "rhs": rhs,
                     "relative_excess": rel})
    return rows, {"cases": count, "exponent_offset": exponent_offset,
                  "max_relative_excess": worst,
                  "violations": sum(1 for row in rows if row["relative_excess"] > 1e-9)}


# ----------------------------------------------------------------------------
# degree detection

def detection_family() -> list:
    """Named polynomials of the detection battery with their singular loci
    (callables returning a point of the locus from a uniform number)."""
    def origin(n):
        return lambda u: np.zeros(n)

    def axis(n, i):
        def f(u):
            x = np.zeros(n)
            x[i] = 1.6 * u - 0.8
            return x
        return f

    fam = [
        ("cross2", catalog.cross(2), [origin(2)]),
        ("cross3", catalog.cross(3), [axis(3, 2)]),
        ("triple_cross", catalog.triple_cross(), [origin(3), axis(3, 0), axis(3, 1), axis(3, 2)]),
        ("szulkin", catalog.szulkin(), [origin(3)]),
        ("two_plane_quadric", catalog.two_plane_quadric(), [origin(4)]),
    ]
    for k in range(1, 5):
        fam.append((f"re_z{k}", None, [origin(2)]))
    return fam


def detection_points(seed: int = DEFAULT_SEED, count: int = 500, singular_fraction: float = 0.3):
    """On-set points ``(name, p, x)``.  F_{2,k} members get a random rotation
    angle; products of linear forms get a random rotation of the axes."""
    rng = np.random.default_rng(seed)
    fam = detection_family()
    out = []
    while len(out) < count:
        name, p, loci = fam[len(out) % len(fam)]
        if name.startswith("re_z"):
            p = catalog.re_zk(int(name[4:]), float(rng.uniform(0, math.pi)))
        elif name in ("cross2", "cross3", "triple_cross"):
            Q = catalog.rotation(p.n, rng)
            p = catalog.rotated(p, Q)
            loci = [(lambda f, Q=Q: (lambda u: Q @ f(u)))(f) for f in loci]
        if rng.random() < singular_fraction:
            x = loci[int(rng.integers(len(loci)))](float(rng.random()))
        else:
            x = project_to_zero_set(p, _ball_point(rng, p.n, 0.9))
            if np.linalg.norm(x) > 1 or abs(p(x)) > 1e-12:
                continue
        out.append((name, p, np.asarray(x, dtype=float)))
    return out


def detection_battery(seed: int = DEFAULT_SEED, count: int = 500, scales=(1.0, 0.5, 0.1),
                      calibration=None, opts: ThetaOptions | None = None):
    opts = opts or ThetaOptions()
    rows = []
    t0 = time.time()
    for i, (name, p, x) in enumerate(detection_points(seed, count)):
        truth = vanishing_order(p, x, tol=1e-9)
        lab = detect_degree(p, x, scales, calibration=calibration, opts=opts)
        cert = lab.certificate or {}
        dec = lab.decay or {}
        rows.append({
            "case": i, "family": name, "n": p.n, "d": p.degree,
            "x": ";".join(f"{v:.17g}" for v in x), "vanishing_order": truth,
            "label": -1 if lab.k is None else lab.k, "unresolved": lab.unresolved,
            "agrees": (lab.k == truth) and not lab.unresolved,
            "confidently_wrong": (lab.k is not None) and (lab.k != truth) and not lab.unresolved,
            "criterion": cert.get("criterion", ""), "r": cert.get("r", math.nan),
            "theta": cert.get("value", math.nan), "threshold": cert.get("threshold", math.nan),
            "decay_ratio": dec.get("ratio", math.nan), "decay_bound": dec.get("bound", math.nan),
            "decay_at_floor": dec.get("at_floor", False), "decay_passed": dec.get("passed", True),
            "extrapolated": lab.extrapolated,
        })
    n = len(rows)
    decayed = [r for r in rows if r["criterion"] == "theta-test" and not r["unresolved"]]
    summary = {
        "cases": n,
        "agreement": sum(r["agrees"] for r in rows) / n,
        "confidently_wrong": sum(r["confidently_wrong"] for r in rows),
        "unresolved": sum(r["unresolved"] for r in rows),
        "decay_checked": len(decayed),
        "decay_failures": sum(not r["decay_passed"] for r in decayed),
        "seconds": time.time() - t0,
    }
    return rows, summary


# ----------------------------------------------------------------------------
# degree separation between cones in the plane

def separation_battery(seed: int = DEFAULT_SEED, count: int = 100, h: float = 0.005):
    """Walkup-Wets distance at (0, 1) between a k-line and a j-line cone,
    j < k <= 4, both with random rotation angles."""
    rng = np.random.default_rng(seed)
    pairs = [(j, k) for k in range(2, 5) for j in range(1, k)]
    rows = []
    for i in range(count):
        j, k = pairs[i % len(pairs)]
        a, b = rng.uniform(0, math.pi, size=2)
        A = sample_zero_set(catalog.re_zk(k, a), np.zeros(2), 1.05, h)
        B = sample_zero_set(catalog.re_zk(j, b), np.zeros(2), 1.05, h)
        rows.append({"case": i, "k": k, "j": j, "angle_k": a, "angle_j": b,
                     "walkup_wets": walkup_wets(A, B, np.zeros(2), 1.0)})
    return rows, {"cases": count, "min_distance": min(r["walkup_wets"] for r in rows)}


# ----------------------------------------------------------------------------
# tube volumes

def tube_polynomials(seed: int = DEFAULT_SEED, count: int = 20) -> list:
    """Random harmonic polynomials vanishing at 0 (so the zero set meets the
    sampling ball), n in {2, 3}, degree 2..4."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.choice([2, 3]))
        d = int(rng.integers(2, 5))
        out.append(random_harmonic(n, d, rng, zero_constant=True))
    return out


def tube_battery(seed: int = DEFAULT_SEED, count: int = 20, r_list=(0.005, 0.01, 0.02, 0.04),
                 N: int = 1_000_000):
    rows = []
    for i, p in enumerate(tube_polynomials(seed, count)):
        t0 = time.time()
        vols = tube_volume(p, r_list, mode="zero-set", seed=seed + i, N=N)
        rows.append({"case": i, "n": p.n, "d": p.degree, "slope": tube_slope(vols),
                     **{f"V_{r:g}": v for r, v, _ in vols}, "seconds": time.time() - t0})
    slopes = [r["slope"] for r in rows]
    return rows, {"cases": count, "min_slope": min(slopes), "max_slope": max(slopes),
                  "max_seconds": max(r["seconds"] for r in rows)}


# ----------------------------------------------------------------------------
# Taylor approximation versus the zeta functional

def ratio_cases(seed: int, count: int = 200):
    """Cases ``(p, x, r, k, zeta)``: random harmonic p with n in {2, 3} and
    degree 2..4, x a point of the zero set in B(0, 1/2), r log-uniform in
    [0.02, 1] and k below the degree, kept when zeta is finite and nonzero."""
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < count:
        n = int(rng.choice([2, 3], p=[0.6, 0.4]))
        d = int(rng.integers(2, 5))
        p = random_harmonic(n, d, rng, zero_constant=True)
        x = project_to_zero_set(p, _ball_point(rng, n, 0.5))
        if not abs(p(x)) < 1e-12 or np.linalg.norm(x) > 1:
            continue
        k = int(rng.integers(1, d))
        r = float(10 ** rng.uniform(math.log10(0.02), 0))
        z = zeta_hat(p, x, r, k, count=2048).value
        if not math.isfinite(z) or z == 0:
            continue
        cases.append((p, x, r, k, z))
    return cases


def ratio_battery(seed: int, count: int = 200, opts: ThetaOptions | None = None):
    """Rows with ``theta_upper_taylor / zeta^(1/k)`` (raw) and the same ratio
    with the measurement floor subtracted from theta."""
    opts = opts or ThetaOptions()
    rows = []
    for i, (p, x, r, k, z) in enumerate(ratio_cases(seed, count)):
        theta, _, info = theta_upper_taylor(p, x, r, k, opts.h, opts.margin, opts.max_vertices,
                                            full_output=True)
        s = z ** (1.0 / k)
        rows.append({"case": i, "n": p.n, "d": p.degree, "k": k, "r": r, "zeta": z,
                     "theta": theta, "floor": info["floor"], "ratio": theta / s,
                     "ratio_adjusted": max(theta - info["floor"], 0.0) / s})
    return rows, ratio_summary(rows)


def ratio_summary(rows) -> dict:
    raw = np.array([r["ratio"] for r in rows])
    adj = np.array([r["ratio_adjusted"] for r in rows])
    return {
        "cases": len(rows), "all_finite": bool(np.all(np.isfinite(raw))),
        "raw_max": float(raw.max()), "raw_p95": float(np.percentile(raw, 95)),
        "raw_median": float(np.median(raw)),
        "adjusted_max": float(adj.max()), "adjusted_p95": float(np.percentile(adj, 95)),
        "adjusted_median": float(np.median(adj)),
    }


BATTERIES = {
    "frequency": frequency_battery,
    "doubling": doubling_battery,
    "detection": detection_battery,
    "separation": separation_battery,
    "tube": tube_battery,
    "ratio": ratio_battery,
}
