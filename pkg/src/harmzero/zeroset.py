"""Zero-set sampling on grids, point clouds and Walkup-Wets distances."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from .poly import MultiPoly, shifted

DEFAULT_MAX_VERTICES = 2_500_000
SLAB_VERTICES = 1_000_000


class ResourceError(RuntimeError):
    """A requested grid exceeds the configured vertex budget."""


class UndefinedDistanceError(ValueError):
    pass


class CloudFormatError(ValueError):
    pass


def poly_hash(p: MultiPoly | None) -> str:
    if p is None:
        return ""
    return hashlib.sha256(p.to_json(sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class PointCloud:
    """Finite sample of a set inside the closed ball ``B(center, radius)``."""

    n: int
    points: np.ndarray
    center: np.ndarray
    radius: float
    resolution: float
    generator: str = ""
    _tree: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.n)
        self.center = np.asarray(self.center, dtype=float).reshape(self.n)
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if len(self.points):
            far = np.linalg.norm(self.points - self.center, axis=1).max()
            if far > self.radius * (1 + 1e-9) + 1e-12:
                raise ValueError("cloud points must lie in the closed ball")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def in_ball(self, x, r: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not len(self.points):
            return self.points
        idx = self.tree.query_ball_point(x, r * (1 + 1e-12))
        return self.points[np.sort(np.asarray(idx, dtype=int))]

    def subset(self, mask) -> "PointCloud":
        return replace(self, points=self.points[mask], _tree=None)


def rescale_cloud(A: PointCloud, x, r: float) -> PointCloud:
    """``(A - x) / r`` with centre, radius and resolution carried along."""
    if r <= 0:
        raise ValueError("r must be positive")
    x = np.asarray(x, dtype=float)
    return PointCloud(A.n, (A.points - x) / r, (A.center - x) / r, A.radius / r,
                      A.resolution / r, A.generator)


# ----------------------------------------------------------------------------
# grid evaluation

def grid_axes(center, half_width: float, h: float) -> list:
    """Axis coordinates ``c_i + h j`` for ``|j| <= ceil(half_width / h)``."""
    m = int(math.ceil(half_width / h - 1e-9))
    j = np.arange(-m, m + 1) * h
    return [c + j for c in np.asarray(center, dtype=float)]


def check_budget(shape, max_vertices: int):
    total = int(np.prod([int(s) for s in shape], dtype=np.float64))
    if total > max_vertices:
        raise ResourceError(
            f"grid of shape {tuple(shape)} has {total} vertices, over the cap of {max_vertices}"
        )


def effective_pitch(n: int, half_width: float, h: float, max_vertices: int) -> float:
    """Smallest pitch not below ``h`` whose grid fits the vertex budget."""
    per_axis = int(math.floor(max_vertices ** (1.0 / n) + 1e-9))
    m = max((per_axis - 1) // 2, 1)
    return max(h, half_width / m)


def grid_values(p: MultiPoly, axes) -> np.ndarray:
    """Values of p on the tensor grid ``axes[0] x ... x axes[n-1]``.

    The polynomial is recentred at the grid centre and contracted axis by
    axis against Vandermonde matrices.
    """
    c = np.array([0.5 * (a[0] + a[-1]) for a in axes])
    q = shifted(p, c)
    d = max(q.degree, 0)
    R = q.dense_tensor(d)
    for a, ci in zip(axes, c):
        V = (np.asarray(a) - ci)[:, None] ** np.arange(d + 1)[None, :]
        R = np.tensordot(R, V, axes=([0], [1]))
    return R


def iter_slabs(p: MultiPoly, axes, overlap: int = 1, slab_vertices: int = SLAB_VERTICES):
    """Yield ``(start, values)`` for slabs of the grid along axis 0.  Consecutive
    slabs share ``overlap`` rows."""
    rest = int(np.prod([len(a) for a in axes[1:]])) if len(axes) > 1 else 1
    rows = max(overlap + 1, slab_vertices // max(rest, 1))
    m0 = len(axes[0])
    start = 0
    while True:
        stop = min(start + rows, m0)
        yield start, grid_values(p, [axes[0][start:stop]] + list(axes[1:]))
        if stop >= m0:
            break
        start = stop - overlap


# ----------------------------------------------------------------------------
# zero-set sampling

def _edge_roots(p: MultiPoly, a, b, fa, fb, steps: int) -> np.ndarray:
    """Bisection on the segments ``[a, b]`` then a final secant step."""
    for _ in range(steps):
        m = 0.5 * (a + b)
        fm = p.eval_many(m)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left[:, None], m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left[:, None], b, m)
        fb = np.where(left, fb, fm)
        zero = fm == 0
        if zero.any():
            a[zero] = m[zero]
            b[zero] = m[zero]
            fa[zero] = 0.0
            fb[zero] = 0.0
    den = fa - fb
    t = np.divide(fa, den, out=np.full_like(fa, 0.5), where=den != 0)
    return a + t[:, None] * (b - a)


def _coords(axes, idx_tuple) -> np.ndarray:
    return np.stack([axes[i][idx_tuple[i]] for i in range(len(axes))], axis=1)


def sample_zero_set(p: MultiPoly, center, radius: float, h: float,
                    max_vertices: int = DEFAULT_MAX_VERTICES, bisect_steps: int = 7,
                    generator: str | None = None) -> PointCloud:
    """Sample ``{p = 0}`` inside the closed ball by bisecting sign changes along
    the edges of a grid of pitch ``h`` aligned with ``center``."""
    if h <= 0:
        raise ValueError("h must be positive")
    n = p.n
    center = np.asarray(center, dtype=float)
    axes = grid_axes(center, radius, h)
    check_budget([len(a) for a in axes], max_vertices)
    m0 = len(axes[0])
    pts = []
    for start, V in iter_slabs(p, axes):
        rows = V.shape[0]
        last = start + rows >= m0
        own = rows if last else rows - 1  # rows owned by this slab
        sl_axes = [axes[0][start:start + rows]] + list(axes[1:])
        zero_idx = np.nonzero(V[:own] == 0)
        if len(zero_idx[0]):
            pts.append(_coords(sl_axes, zero_idx))
        for ax in range(n):
            if ax == 0:
                lo = V[:-1]
                hi = V[1:]
            else:
                sl_lo = [slice(0, own)] + [slice(None)] * (n - 1)
                sl_hi = list(sl_lo)
                sl_lo[ax] = slice(0, -1)
                sl_hi[ax] = slice(1, None)
                lo = V[tuple(sl_lo)]
                hi = V[tuple(sl_hi)]
            idx = np.nonzero(lo * hi < 0)
            if not len(idx[0]):
                continue
            fa = lo[idx]
            fb = hi[idx]
            ia = _coords(sl_axes, idx)
            ib = ia.copy()
            ib[:, ax] += h
            mid = 0.5 * (ia + ib)
            keep = np.linalg.norm(mid - center, axis=1) <= radius + h
            ia, ib, fa, fb = ia[keep], ib[keep], fa[keep], fb[keep]
            for s in range(0, len(ia), 200_000):
                pts.append(_edge_roots(p, ia[s:s + 200_000], ib[s:s + 200_000],
                                       fa[s:s + 200_000], fb[s:s + 200_000], bisect_steps))
    P = np.vstack(pts) if pts else np.zeros((0, n))
    if len(P):
        P = P[np.linalg.norm(P - center, axis=1) <= radius]
    gen = poly_hash(p) if generator is None else generator
    return PointCloud(n, P, center, radius, h, gen)


# ----------------------------------------------------------------------------
# excess and the relative Walkup-Wets distance

def _as_points(A) -> np.ndarray:
    if isinstance(A, PointCloud):
        return A.points
    return np.asarray(A, dtype=float)


def _tree_of(B):
    if isinstance(B, PointCloud):
        return B.tree
    if isinstance(B, cKDTree):
        return B
    return cKDTree(np.asarray(B, dtype=float))


def excess(A, B, tree=None) -> float:
    """``sup_{a in A} dist(a, B)``; zero for empty A, undefined for empty B."""
    P = _as_points(A)
    if len(P) == 0:
        return 0.0
    if tree is None:
        if len(_as_points(B)) == 0:
            raise UndefinedDistanceError("excess over an empty set is undefined")
        tree = _tree_of(B)
    elif tree.n == 0:
        raise UndefinedDistanceError("excess over an empty set is undefined")
    if len(P) <= 2048:
        return float(tree.query(P)[0].max())
    # Exact in two passes.  A bounded tree query settles the points close to B
    # cheaply; the rest go to the early-break scan of directed_hausdorff, which
    # is fast exactly when those points are far from B.
    data = tree.data
    probe = data[np.linspace(0, len(data) - 1, min(256, len(data))).astype(int)]
    gap = float(np.median(tree.query(probe, k=2)[0][:, -1])) if len(data) > 1 else 0.0
    u = 3 * gap if gap > 0 else 1e-12
    d, _ = tree.query(P, distance_upper_bound=u)
    far = ~np.isfinite(d)
    best = float(d[~far].max()) if (~far).any() else 0.0
    if far.any():
        best = max(best, float(directed_hausdorff(P[far], data, seed=0)[0]))
    return best


def restrict(A, x, r: float) -> np.ndarray:
    """Points of A in the closed ball ``B(x, r)``."""
    if isinstance(A, PointCloud):
        return A.in_ball(x, r)
    P = np.asarray(A, dtype=float)
    if not len(P):
        return P
    return P[np.linalg.norm(P - np.asarray(x, dtype=float), axis=1) <= r * (1 + 1e-12)]


def relative_excess(A, B, x, r: float, tree=None) -> float:
    """``r^{-1} excess(A ∩ B(x,r), B)``: only the first set is restricted."""
    return excess(restrict(A, x, r), B, tree) / r


def walkup_wets(A, B, x, r: float, tree_a=None, tree_b=None) -> float:
    """Relative Walkup-Wets distance between A and B in ``B(x, r)``."""
    Ar, Br = restrict(A, x, r), restrict(B, x, r)
    if len(Ar) == 0 and len(Br) == 0:
        raise UndefinedDistanceError("both sets miss the ball")
    tree_a = tree_a if tree_a is not None else (_tree_of(A) if len(_as_points(A)) else None)
    tree_b = tree_b if tree_b is not None else (_tree_of(B) if len(_as_points(B)) else None)
    if (len(Ar) and tree_b is None) or (len(Br) and tree_a is None):
        raise UndefinedDistanceError("excess over an empty set is undefined")
    e1 = excess(Ar, None, tree_b) if len(Ar) else 0.0
    e2 = excess(Br, None, tree_a) if len(Br) else 0.0
    return max(e1, e2) / r


# ----------------------------------------------------------------------------
# cloud interchange

def save_cloud(cloud: PointCloud, path) -> None:
    path = str(path)
    header = {"n": cloud.n, "center": cloud.center.tolist(), "radius": cloud.radius,
              "resolution": cloud.resolution, "generator": cloud.generator}
    if path.endswith(".npz"):
        np.savez(path, points=cloud.points, header=json.dumps(header))
        return
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header) + "\n")
        np.savetxt(fh, cloud.points, fmt="%.17g")


def load_cloud(path) -> PointCloud:
    path = str(path)
    if path.endswith(".npz"):
        with np.load(path) as z:
            try:
                header = json.loads(str(z["header"]))
                pts = np.asarray(z["points"], dtype=float)
            except (KeyError, json.JSONDecodeError) as exc:
                raise CloudFormatError(f"{path}: {exc}") from None
        return _cloud_from(header, pts, path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise CloudFormatError(f"{path}: line 1: expected a '# {{json header}}' line")
    try:
        header = json.loads(lines[0][1:])
    except json.JSONDecodeError as exc:
        raise CloudFormatError(f"{path}: line 1, column {exc.colno + 1}: {exc.msg}") from None
    n = header.get("n")
    if not isinstance(n, int) or n < 1:
        raise CloudFormatError(f"{path}: line 1: header field 'n' must be a positive integer")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        tok = line.split()
        if len(tok) != n:
            raise CloudFormatError(f"{path}: line {i}: expected {n} values, found {len(tok)}")
        try:
            rows.append([float(t) for t in tok])
        except ValueError:
            bad = next(j for j, t in enumerate(tok) if not _is_float(t))
            raise CloudFormatError(f"{path}: line {i}, field {bad + 1}: not a number: {tok[bad]!r}") from None
    return _cloud_from(header, np.array(rows).reshape(-1, n), path)


def _is_float(t) -> bool:
    try:
        float(t)
        return True
    except ValueError:
        return False


def _cloud_from(header, pts, path) -> PointCloud:
    try:
        return PointCloud(int(header["n"]), pts, header["center"], float(header["radius"]),
                          float(header["resolution"]), header.get("generator", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise CloudFormatError(f"{path}: header: {exc}") from None


def cloud_from_points(points, resolution: float, center=None, radius=None) -> PointCloud:
    """Wrap raw points; the ball defaults to the smallest one about the mean."""
    P = np.asarray(points, dtype=float)
    c = P.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    R = float(np.linalg.norm(P - c, axis=1).max()) if radius is None else float(radius)
    return PointCloud(P.shape[1], P, c, R, resolution)
