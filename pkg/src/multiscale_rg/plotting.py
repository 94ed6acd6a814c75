"""Matplotlib figures written next to the delimited outputs."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return Path(path)


def plot_raster(image: np.ndarray, path: Path, title: str = "", t_max: float = 1.0) -> Path:
    """Scale-by-time raster; scale 1 on top."""
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.imshow(image, cmap="gray", vmin=0, vmax=255, aspect="auto", interpolation="nearest",
              extent=(0, t_max, image.shape[0] + 0.5, 0.5))
    ax.set_xlabel("t")
    ax.set_ylabel("n")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_maps(tables: Mapping[str, Sequence[tuple[float, float]]], path: Path, title: str = "") -> Path:
    """Flow maps in the Cantor representation, one line per label."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for label, rows in tables.items():
        xs = [float(x) for x, _ in rows]
        ys = [float(y) for _, y in rows]
        ax.plot(xs, ys, ".-", ms=2, lw=0.6, label=label)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("x")
    ax.set_ylabel("psi(x)")
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_scatter_maps(points: Mapping[str, Sequence[tuple[float, float]]], path: Path, title: str = "") -> Path:
    """Sample clouds of random maps in the Cantor representation."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for label, rows in points.items():
        ax.scatter([float(x) for x, _ in rows], [float(y) for _, y in rows], s=1, alpha=0.4, label=label)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7, markerscale=6)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_expectations(series: Mapping[str, Sequence[tuple[int, float, float]]],
                      fits: Mapping[str, tuple[float, float, float]], path: Path) -> Path:
    """Mean against N with error bars; dashed fitted curves ``L + C exp(k N)``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rows in series.items():
        ns = np.array([r[0] for r in rows], dtype=float)
        ms = np.array([r[1] for r in rows])
        ci = np.array([r[2] for r in rows])
        line = ax.errorbar(ns, ms, yerr=ci, fmt="o", ms=3, label=label)
        if label in fits:
            L, k, _ = fits[label]
            if np.isfinite(k):
                c = np.exp(np.mean(np.log(np.abs(ms - L) + 1e-300) - k * ns)) * np.sign(np.mean(ms - L))
                grid = np.linspace(ns.min(), ns.max(), 100)
                ax.plot(grid, L + c * np.exp(k * grid), "--", color=line[0].get_color(), lw=0.8)
    ax.set_xlabel("N")
    ax.set_ylabel("E[u_n(t)]")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_coefficients(p_rows: Mapping[int, Mapping[int, int]], path: Path) -> Path:
    """``log2 p_n`` against ``n`` for each level N."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for N, row in sorted(p_rows.items()):
        ns = [n for n, p in sorted(row.items()) if p > 0]
        ax.plot(ns, [row[n].bit_length() - 1 for n in ns], "o-", ms=3, label=f"N={N}")
    ax.set_yscale("symlog")
    ax.set_xlabel("n")
    ax.set_ylabel("floor(log2 p_n)")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return _save(fig, path)
