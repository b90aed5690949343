"""Report figures, rendered off-screen to PNG files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (math.sqrt(5) - 1) / 2
WIDTH = 6.4
PALETTE = ["#08589e", "#4eb3d3", "#a8ddb5", "#fdae61", "#d7191c", "#7b3294", "#636363"]

STYLE = {
    "axes.prop_cycle": matplotlib.cycler(color=PALETTE),
    "axes.labelsize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

# no timestamps or version strings, so reruns write identical files
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)
    return path


def overlap_heatmap(names: Sequence[str], matrix: Sequence[Sequence[float]], path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        side = max(3.0, 0.6 * len(names) + 1.5)
        fig, ax = plt.subplots(figsize=(side + 0.8, side))
        im = ax.imshow(matrix, vmin=0.0, vmax=1.0, cmap="Blues")
        ax.set_xticks(range(len(names)), labels=names, rotation=45, ha="right")
        ax.set_yticks(range(len(names)), labels=names)
        for i, row in enumerate(matrix):
            for j, v in enumerate(row):
                ax.text(j, i, f"{v:.2f}", ha="center", va="center",
                        color="white" if v > 0.6 else "black", fontsize=7)
        ax.set_title("Overlap of correct predictions (IoU)")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        return _save(fig, Path(path))


def metric_bars(rows: Sequence[Mapping], path: str | Path) -> Path:
    """Grouped precision/recall/F1 bars, one group per algorithm."""
    names = [r["algorithm"] for r in rows]
    keys = ("precision", "recall", "f1")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(WIDTH, WIDTH * GOLDEN))
        w = 0.8 / len(keys)
        for k, key in enumerate(keys):
            xs = [i + (k - 1) * w for i in range(len(names))]
            ax.bar(xs, [r[key] for r in rows], width=w, label=key.upper() if key == "f1" else key.title())
        ax.set_xticks(range(len(names)), labels=names)
        ax.set_ylim(0, 1)
        ax.set_ylabel("score")
        ax.legend(ncol=3, loc="upper center", bbox_to_anchor=(0.5, 1.12))
        return _save(fig, Path(path))


def category_histogram(counts: Mapping[str, int], path: str | Path, title: str = "") -> Path:
    labels = list(counts)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(WIDTH, WIDTH * GOLDEN))
        bars = ax.bar(range(len(labels)), [counts[k] for k in labels],
                      color=[PALETTE[i % len(PALETTE)] for i in range(len(labels))])
        for b, k in zip(bars, labels):
            ax.annotate(str(counts[k]), (b.get_x() + b.get_width() / 2, b.get_height()),
                        ha="center", va="bottom", fontsize=7)
        ax.set_xticks(range(len(labels)), labels=labels, rotation=30, ha="right")
        ax.set_ylabel("fixes")
        if title:
            ax.set_title(title)
        return _save(fig, Path(path))
