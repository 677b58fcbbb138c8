"""Figures written next to the CLI's line-delimited output.

Uses the object-oriented Agg API so nothing touches pyplot's global state.
"""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=120, bbox_inches="tight")


def plot_bpm_trace(records, path, title=None):
    """BPM and confidence over time from trace ``reading`` records."""
    t = np.array([r["t_ms"] for r in records], dtype=float) / 1000.0
    bpm = np.array([np.nan if r["bpm"] is None else r["bpm"] for r in records], dtype=float)
    conf = np.array([r["confidence"] for r in records], dtype=float)
    gated = np.array([r["gated"] for r in records], dtype=bool)

    fig = Figure(figsize=(8, 4.5))
    ax = fig.add_subplot(2, 1, 1)
    ax.plot(t, bpm, color="tab:red", lw=1.5)
    if gated.any():
        ax.scatter(t[gated], np.full(gated.sum(), np.nanmin(bpm) if np.isfinite(bpm).any() else 0),
                   marker="|", color="0.5", label="gated out")
        ax.legend(loc="lower right", frameon=False)
    ax.set_ylabel("BPM")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)

    ax2 = fig.add_subplot(2, 1, 2, sharex=ax)
    ax2.plot(t, conf, color="tab:blue", lw=1.0)
    ax2.set_ylabel("peak / mean power")
    ax2.set_xlabel("time [s]")
    ax2.grid(alpha=0.3)
    _save(fig, path)


def plot_confusion(cm, path, title="Confusion matrix"):
    m = cm.matrix
    fig = Figure(figsize=(6.5, 5.5))
    ax = fig.add_subplot(1, 1, 1)
    im = ax.imshow(m, vmin=0.0, vmax=1.0, cmap="Blues")
    ax.set_xticks(range(len(cm.labels)))
    ax.set_yticks(range(len(cm.labels)))
    ax.set_xticklabels(cm.labels, rotation=45, ha="right")
    ax.set_yticklabels(cm.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            ax.text(j, i, f"{m[i, j]:.2f}", ha="center", va="center",
                    color="white" if m[i, j] > 0.5 else "black", fontsize=8)
    ax.set_title(f"{title} (accuracy {cm.accuracy:.3f})")
    fig.colorbar(im, ax=ax, fraction=0.046)
    _save(fig, path)
