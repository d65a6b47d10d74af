"""Figure rendering for the CLI report paths.

Figures are written to files next to the delimited outputs; nothing here
opens a window (Agg backend throughout).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvalReport, TrackSet


def save_track_figure(tracks: TrackSet, path, title="tracks"):
    """Plot per-identity center trajectories in image coordinates."""
    by_id: dict[int, list[tuple[int, float, float]]] = {}
    for frame in sorted(tracks):
        for tid, box in tracks[frame].items():
            by_id.setdefault(tid, []).append((frame, box.cx, box.cy))

    fig, ax = plt.subplots(figsize=(8, 5))
    for tid in sorted(by_id):
        pts = sorted(by_id[tid])
        xs = [p[1] for p in pts]
        ys = [p[2] for p in pts]
        ax.plot(xs, ys, lw=1.2, label=f"id {tid}")
        ax.plot(xs[-1], ys[-1], "o", ms=3, color=ax.lines[-1].get_color())
    ax.invert_yaxis()  # image coordinates: origin top-left
    ax.set_xlabel("x (px)")
    ax.set_ylabel("y (px)")
    ax.set_title(title)
    if 0 < len(by_id) <= 12:
        ax.legend(fontsize=8, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_eval_figure(report: EvalReport, path, title="evaluation"):
    """Bar chart of the error counts with the MOTA score annotated."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = ["FP", "FN", "IDs"]
    counts = [report.fp, report.fn, report.ids]
    bars = ax.bar(names, counts, color=["#d62728", "#1f77b4", "#ff7f0e"])
    ax.bar_label(bars)
    ax.set_ylabel("count")
    ax.set_title(f"{title}  (MOTA = {report.mota:.3f}, GT = {report.gt_count})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
