"""Sign fields on grids: connected components of {p > 0} and {p < 0},
sign alternation across the zero set, translation invariance and corkscrew
clearances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.linalg import null_space

from .poly import MultiPoly, grad_many
from .zeroset import ResourceError, effective_pitch, grid_values, sample_zero_set

__all__ = [
    "GridField", "grid_field", "Components", "components", "sign_bipartite_check",
    "component_graph", "invariant_subspace", "corkscrew_estimate", "CorkscrewResult",
    "parse_box", "AllZeroFieldError",
]

DEFAULT_GRID_CAP = 61 ** 4  # about 1.4e7 vertices
SLAB = 2_000_000


class AllZeroFieldError(ValueError):
    pass


def parse_box(box, n: int) -> np.ndarray:
    """Bounds as an ``(n, 2)`` array.  Accepts ``(lo, hi)`` for a cube or one
    pair per axis."""
    b = np.asarray(box, dtype=float)
    if b.shape == (2,):
        b = np.tile(b, (n, 1))
    if b.shape != (n, 2) or np.any(b[:, 1] <= b[:, 0]):
        raise ValueError(f"box must be (lo, hi) or {n} pairs with lo < hi")
    return b


@dataclass
class GridField:
    """Signs of p at the vertices of a regular grid.  A vertex is put in the
    zero band (sign 0) when ``|p| <= kappa * g``, where g is the larger of
    ``pitch * |grad p|`` and the largest change of p to a face neighbour."""

    box: np.ndarray
    pitch: float
    axes: list
    signs: np.ndarray
    kappa: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return self.signs.shape

    def coords(self, idx) -> np.ndarray:
        idx = np.atleast_2d(idx)
        return np.stack([self.axes[i][idx[:, i]] for i in range(len(self.axes))], axis=1)


def _axes(box: np.ndarray, pitch: float) -> list:
    """Evenly spaced vertices spanning each side, spacing at least ``pitch``."""
    out = []
    for lo, hi in box:
        m = max(int(math.floor((hi - lo) / pitch + 1e-9)), 1)
        out.append(np.linspace(lo, hi, m + 1))
    return out


def grid_field(p: MultiPoly, box, pitch: float, kappa: float = 1.0,
               max_vertices: int = DEFAULT_GRID_CAP) -> GridField:
    n = p.n
    box = parse_box(box, n)
    axes = _axes(box, pitch)
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape, dtype=np.int64))
    if total > max_vertices:
        raise ResourceError(f"grid of shape {shape} has {total} vertices, over the cap of {max_vertices}")
    signs = np.empty(shape, dtype=np.int8)
    grads = [p.derivative(i) for i in range(n)]
    rest = total // shape[0]
    rows = max(1, SLAB // rest)
    m0 = shape[0]
    for a in range(0, m0, rows):
        b = min(a + rows, m0)
        lo, hi = max(a - 1, 0), min(b + 1, m0)
        V = grid_values(p, [axes[0][lo:hi]] + list(axes[1:]))
        D = np.zeros_like(V)
        for ax in range(n):
            d = np.abs(np.diff(V, axis=ax))
            s0 = [slice(None)] * n
            s1 = [slice(None)] * n
            s0[ax] = slice(0, -1)
            s1[ax] = slice(1, None)
            np.maximum(D[tuple(s0)], d, out=D[tuple(s0)])
            np.maximum(D[tuple(s1)], d, out=D[tuple(s1)])
        sub = [axes[0][lo:hi]] + list(axes[1:])
        G2 = sum(grid_values(g, sub) ** 2 for g in grads)
        np.maximum(D, pitch * np.sqrt(G2), out=D)
        S = np.sign(V).astype(np.int8)
        S[np.abs(V) <= kappa * D] = 0
        signs[a:b] = S[a - lo: a - lo + (b - a)]
    band = int(np.count_nonzero(signs == 0))
    diag = {"vertices": total, "band_vertices": band, "band_fraction": band / total}
    return GridField(box, float(pitch), axes, signs, kappa, diag)


@dataclass
class Components:
    pos: int
    neg: int
    field: GridField
    pos_labels: np.ndarray = field(repr=False)
    neg_labels: np.ndarray = field(repr=False)
    pos_sizes: list = field(default_factory=list)
    neg_sizes: list = field(default_factory=list)

    @property
    def counts(self) -> tuple:
        return self.pos, self.neg

    def to_dict(self) -> dict:
        return {"pos": self.pos, "neg": self.neg, "pitch": self.field.pitch,
                "shape": list(self.field.shape), "pos_sizes": self.pos_sizes,
                "neg_sizes": self.neg_sizes, **self.field.diagnostics}


def components(p: MultiPoly, box, pitch: float, kappa: float = 1.0,
               max_vertices: int = DEFAULT_GRID_CAP, gf: GridField | None = None) -> Components:
    """Face-connected components of the positive and negative vertices."""
    gf = gf or grid_field(p, box, pitch, kappa, max_vertices)
    if not np.any(gf.signs):
        raise AllZeroFieldError("every grid vertex lies in the zero band")
    out = []
    for s in (1, -1):
        lab, num = ndimage.label(gf.signs == s)
        sizes = np.bincount(lab.ravel())[1:].tolist() if num else []
        out.append((lab, num, sorted(sizes, reverse=True)))
    (lp, np_, sp), (ln, nn, sn) = out
    return Components(np_, nn, gf, lp, ln, sp, sn)


def _short_crossings(gf: GridField, max_run: int = 3):
    """Vertex index pairs ``(a, b, axis)`` flanking a run of at most ``max_run``
    band vertices along one axis."""
    S = gf.signs
    nz = S != 0
    bz = ~nz
    out = []
    n = S.ndim
    for ax in range(n):
        m = S.shape[ax]
        for L in range(1, max_run + 1):
            if m < L + 2:
                continue

            def sl(off, L=L):
                s = [slice(None)] * n
                s[ax] = slice(off, m - (L + 1) + off)
                return tuple(s)

            cond = nz[sl(0)] & nz[sl(L + 1)]
            for j in range(1, L + 1):
                cond &= bz[sl(j)]
            idx = np.argwhere(cond)
            if len(idx):
                b = idx.copy()
                b[:, ax] += L + 1
                out.append((idx, b, ax, L))
    return out


def sign_bipartite_check(p: MultiPoly, box, pitch: float, kappa: float = 1.0,
                         transversality: float = 0.5, comps: Components | None = None,
                         full_output: bool = False):
    """Check that every smooth crossing of the zero band joins a positive and a
    negative component.

    A crossing is a run of at most 3 band vertices along a grid axis between
    two signed vertices; it counts as smooth when the derivative along that
    axis keeps one sign over the run and carries at least ``transversality``
    of the gradient norm.
    """
    comps = comps or components(p, box, pitch, kappa)
    gf = comps.field
    checked = bad = 0
    edges = set()
    for A, B, ax, L in _short_crossings(gf):
        # derivative along the axis at both ends and the run vertices
        pts = [gf.coords(A + np.eye(gf.signs.ndim, dtype=int)[ax] * j) for j in range(L + 2)]
        G = [grad_many(p, P) for P in pts]
        dax = np.stack([g[:, ax] for g in G], axis=1)
        norm = np.stack([np.linalg.norm(g, axis=1) for g in G], axis=1)
        mono = (np.all(dax > 0, axis=1) | np.all(dax < 0, axis=1))
        trans = np.all(np.abs(dax) >= transversality * norm, axis=1)
        smooth = mono & trans
        sa = gf.signs[tuple(A[smooth].T)]
        sb = gf.signs[tuple(B[smooth].T)]
        checked += int(smooth.sum())
        bad += int(np.count_nonzero(sa == sb))
        opp = sa != sb
        for a, b, s in zip(A[smooth][opp], B[smooth][opp], sa[opp]):
            ia, ib = tuple(a), tuple(b)
            if s > 0:
                edges.add((int(comps.pos_labels[ia]), int(comps.neg_labels[ib])))
            else:
                edges.add((int(comps.pos_labels[ib]), int(comps.neg_labels[ia])))
    ok = bad == 0 and checked > 0
    if full_output:
        return ok, {"crossings": checked, "same_sign": bad, "edges": sorted(edges)}
    return ok


def component_graph(p: MultiPoly, box, pitch: float, kappa: float = 1.0) -> dict:
    """Adjacency between positive and negative components across smooth
    crossings: nodes ``('+', i)`` and ``('-', j)``."""
    comps = components(p, box, pitch, kappa)
    ok, info = sign_bipartite_check(p, box, pitch, kappa, comps=comps, full_output=True)
    adj = {("+", i): set() for i in range(1, comps.pos + 1)}
    adj.update({("-", j): set() for j in range(1, comps.neg + 1)})
    for i, j in info["edges"]:
        adj[("+", i)].add(("-", j))
        adj[("-", j)].add(("+", i))
    return adj


# ----------------------------------------------------------------------------
# translation invariance

def invariant_subspace(p: MultiPoly, rcond: float = 1e-12) -> np.ndarray:
    """Orthonormal basis (columns) of ``{v : v . grad p = 0}`` for homogeneous p,
    the directions along which p is translation invariant."""
    d = p.degree
    if p.is_zero() or any(sum(e) != d for e in p.exponents.tolist()):
        raise ValueError("p must be a nonzero homogeneous polynomial")
    n = p.n
    if d == 0:
        return np.eye(n)
    ders = [p.derivative(i) for i in range(n)]
    keys = sorted({tuple(e) for q in ders for e in q.terms})
    pos = {e: i for i, e in enumerate(keys)}
    M = np.zeros((len(keys), n))
    for i, q in enumerate(ders):
        for e, c in q.terms.items():
            M[pos[e], i] = c
    if not len(keys):
        return np.eye(n)
    return null_space(M, rcond=rcond)


# ----------------------------------------------------------------------------
# corkscrew clearances

@dataclass
class CorkscrewResult:
    M_pos: float
    M_neg: float
    mode: str
    rows: list   # (Q index, r, side, best clearance, r / clearance, witness)
    Q: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"M_pos": self.M_pos, "M_neg": self.M_neg, "mode": self.mode,
                "cases": len(self.rows)}


def corkscrew_estimate(p: MultiPoly, box, pitch: float, r_list, mode: str = "distance",
                       n_Q: int = 50, seed: int = 0, max_vertices: int = DEFAULT_GRID_CAP,
                       Q=None) -> CorkscrewResult:
    """Worst ratio ``r / clearance`` over boundary balls ``B(Q, r)``.

    For each sampled ``Q`` on the zero set and each ``r``, the grid vertex of
    each sign inside ``B(Q, r)`` that lies farthest from the zero set is found.
    ``mode="distance"`` measures clearance as the distance to the zero set;
    ``mode="contained"`` also requires the clearance ball to stay in ``B(Q, r)``.
    """
    if mode not in ("distance", "contained"):
        raise ValueError("mode must be 'distance' or 'contained'")
    n = p.n
    boxa = parse_box(box, n)
    r_list = sorted(float(r) for r in r_list)
    rmax = r_list[-1]
    gf = grid_field(p, boxa, pitch, max_vertices=max_vertices)
    center = boxa.mean(axis=1)
    half = float((boxa[:, 1] - boxa[:, 0]).min() / 2)
    R = float(np.linalg.norm(boxa[:, 1] - boxa[:, 0]) / 2)
    cap = 8_000_000
    cloud = sample_zero_set(p, center, R, effective_pitch(n, R, pitch / 2, cap), max_vertices=cap)
    if not len(cloud):
        raise AllZeroFieldError("the zero set does not meet the box")
    tree = cloud.tree
    if Q is None:
        inner = cloud.points[np.all(np.abs(cloud.points - center) <= half - rmax, axis=1)]
        if not len(inner):
            raise ValueError("no zero-set points at distance rmax from the box boundary")
        rng = np.random.default_rng(seed)
        Q = inner[rng.choice(len(inner), size=min(n_Q, len(inner)), replace=False)]
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    lo = boxa[:, 0]
    rows = []
    worst = {1: 0.0, -1: 0.0}
    dist_all = np.full(gf.shape, np.nan, dtype=np.float64)
    for qi, q in enumerate(Q):
        i0 = np.maximum(np.floor((q - rmax - lo) / pitch).astype(int), 0)
        i1 = np.minimum(np.ceil((q + rmax - lo) / pitch).astype(int) + 1, gf.shape)
        sub = tuple(slice(a, b) for a, b in zip(i0, i1))
        S = gf.signs[sub].ravel()
        mesh = np.meshgrid(*[gf.axes[i][sub[i]] for i in range(n)], indexing="ij")
        P = np.stack([m.ravel() for m in mesh], axis=1)
        rq = np.linalg.norm(P - q, axis=1)
        # distances to the zero set are cached per vertex across overlapping boxes
        D = dist_all[sub]
        miss = np.isnan(D)
        if miss.any():
            D[miss] = tree.query(gf.coords(np.argwhere(miss) + i0),
                                 distance_upper_bound=rmax + pitch)[0]
            dist_all[sub] = D
        dist = np.minimum(D.ravel(), rmax + pitch)
        for r in r_list:
            inside = rq <= r
            clear = dist if mode == "distance" else np.minimum(dist, r - rq)
            for s in (1, -1):
                m = inside & (S == s)
                if not m.any():
                    rows.append((qi, r, s, 0.0, np.inf, None))
                    worst[s] = np.inf
                    continue
                j = np.argmax(np.where(m, clear, -np.inf))
                c = float(clear[j])
                ratio = r / c if c > 0 else np.inf
                rows.append((qi, r, s, c, ratio, P[j]))
                worst[s] = max(worst[s], ratio)
    return CorkscrewResult(worst[1], worst[-1], mode, rows, Q)
