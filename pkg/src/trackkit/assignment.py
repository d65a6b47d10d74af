"""Gated affinity matrix construction and maximum-affinity matching.

Forbidden (gated-out) pairs are stored as exactly 0. Any pair that passes
both gates has total affinity > 0 for every lambda in [0, 1] (appearance
gate > 0.895 and motion gate > 0.3 force a positive blend), so the zero
sentinel is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import motion
from .affinity import AffinityWeights, total_affinity
from .core import Detection, iou_matrix
from .lifecycle import Tracklet


@dataclass
class AffinityMatrix:
    """Gated J x I affinity values plus the raw components for auditing."""

    tracklet_ids: list[int]
    values: np.ndarray      # (J, I), 0 marks a forbidden pair
    motion: np.ndarray      # raw IoU
    appearance: np.ndarray  # raw appearance affinity, NaN where unavailable


@dataclass
class Matching:
    """Partial bijection between rows (tracklets) and columns (detections)."""

    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)


def build_affinity_matrix(tracklets: list[Tracklet], detections: list[Detection],
                          weights: AffinityWeights,
                          appearance_enabled: bool = True) -> AffinityMatrix:
    """Evaluate gated total affinity for every (tracklet, detection) pair.

    A pair must clear the motion gate, and the appearance gate when appearance
    is in use. Tracklets with no stored embeddings yet are gated on motion
    alone and scored by motion alone, so a provider that omits embeddings
    cannot deadlock first association.
    """
    j, i = len(tracklets), len(detections)
    motion_aff = np.zeros((j, i))
    appearance_aff = np.full((j, i), np.nan)
    values = np.zeros((j, i))
    if j == 0 or i == 0:
        return AffinityMatrix([t.id for t in tracklets], values, motion_aff, appearance_aff)

    pred = np.stack([t.predicted_box().as_array() for t in tracklets])
    det = np.stack([d.box.as_array() for d in detections])
    motion_aff = iou_matrix(pred, det)

    if appearance_enabled:
        missing = [d for d in detections if d.embedding is None]
        if missing:
            raise ValueError(f"missing embedding on detection at frame {missing[0].frame}")
        det_emb = np.stack([d.embedding.values for d in detections])
        hists = [t.history_matrix(weights.n_max) for t in tracklets]
        rows = [r for r, h in enumerate(hists) if h is not None]
        if rows:
            # one matmul for every tracklet's history, then segment means
            counts = np.array([len(hists[r]) for r in rows])
            offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
            dots = np.concatenate([hists[r] for r in rows]) @ det_emb.T
            aff = 1.0 - np.sqrt(np.clip(2.0 - 2.0 * dots, 0.0, None))
            appearance_aff[rows] = np.add.reduceat(aff, offsets, axis=0) / counts[:, None]

    motion_ok = motion_aff > weights.tau_m
    for row, t in enumerate(tracklets):
        app_row = appearance_aff[row]
        if appearance_enabled and t.embeddings:
            ok = motion_ok[row] & (app_row > weights.tau_a)
            values[row, ok] = total_affinity(app_row[ok], motion_aff[row, ok], weights.lambda_)
        else:
            ok = motion_ok[row]
            values[row, ok] = motion_aff[row, ok]
    return AffinityMatrix([t.id for t in tracklets], values, motion_aff, appearance_aff)


def solve_max_assignment(values) -> Matching:
    """Maximum total-affinity matching; zero entries are never matched."""
    vals = values.values if isinstance(values, AffinityMatrix) else np.asarray(values, float)
    j, i = vals.shape
    if j == 0 or i == 0 or not (vals > 0).any():
        return Matching([], list(range(j)), list(range(i)))
    rows, cols = linear_sum_assignment(vals, maximize=True)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if vals[r, c] > 0]
    matched_r = {r for r, _ in pairs}
    matched_c = {c for _, c in pairs}
    return Matching(pairs,
                    [r for r in range(j) if r not in matched_r],
                    [c for c in range(i) if c not in matched_c])


def apply_matching(tracklets: list[Tracklet], detections: list[Detection],
                   matching: Matching, frame: int, noise: motion.NoiseConfig,
                   next_id: int,
                   spawn_filter: Optional[Callable[[Detection], bool]] = None,
                   ) -> tuple[list[Tracklet], int]:
    """Apply a matching: update matched tracklets, miss the rest, spawn the new.

    Returns the list of tracklets spawned from unmatched detections and the
    next free id. spawn_filter restricts which unmatched detections may spawn
    (the pipeline excludes leftover boosted proposals).
    """
    for row, col in matching.pairs:
        tracklets[row].record_match(detections[col], noise)
    for row in matching.unmatched_rows:
        t = tracklets[row]
        t.record_miss(frame, t.predicted_box())
    spawned = []
    for col in matching.unmatched_cols:
        det = detections[col]
        if spawn_filter is not None and not spawn_filter(det):
            continue
        spawned.append(Tracklet(next_id, det, noise))
        next_id += 1
    return spawned, next_id
