"""File-only figures (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "harmzero"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> str:
    path = Path(path)
    if path.suffix.lower() not in (".png", ".svg"):
        raise ValueError("plot files must end in .png or .svg")
    # fixed metadata keeps repeated runs byte-identical
    meta = {"Date": None} if path.suffix.lower() == ".svg" else {"Software": None}
    fig.savefig(path, dpi=120, metadata=meta)
    plt.close(fig)
    return str(path)


def plot_loglog(x, y, path, slope: float | None = None, intercept: float | None = None,
                xlabel: str = "log(1/s)", ylabel: str = "log N", title: str = "") -> str:
    """Scatter of precomputed log values with an optional fitted line."""
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(x, y, "o", color="C0")
    if slope is not None:
        xs = np.linspace(min(x), max(x), 2)
        ax.plot(xs, slope * xs + intercept, "-", color="C1", label=f"slope {slope:.3f}")
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_profile(radii, values, path, ylabel: str = "N(r)", title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(radii, values, "o-")
    ax.set_xscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_sign_slice(gf, path, axis_values=None, title: str = "") -> str:
    """Raster of a 2-D slice of a sign field (middle index on the extra axes)."""
    S = gf.signs
    while S.ndim > 2:
        S = S[..., S.shape[-1] // 2]
    fig, ax = plt.subplots(figsize=(4, 4))
    lo, hi = gf.box[0], gf.box[1]
    ax.imshow(S.T, origin="lower", extent=(lo[0], lo[1], hi[0], hi[1]),
              cmap="coolwarm", vmin=-1, vmax=1, interpolation="nearest")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_strata(points, labels, path, title: str = "") -> str:
    P = np.asarray(points)
    k = np.asarray(labels)
    fig = plt.figure(figsize=(4.5, 4))
    if P.shape[1] >= 3:
        ax = fig.add_subplot(projection="3d")
        for v in np.unique(k):
            m = k == v
            ax.scatter(P[m, 0], P[m, 1], P[m, 2], s=1 if v == 1 else 4, label=f"k={v}")
    else:
        ax = fig.add_subplot()
        for v in np.unique(k):
            m = k == v
            ax.scatter(P[m, 0], P[m, 1], s=1 if v == 1 else 8, label=f"k={v}")
        ax.set_aspect("equal")
    ax.legend(markerscale=4)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
