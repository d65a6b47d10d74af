"""Periodic appearance-based merging of tracklets across occlusion gaps.

A merge joins an older tracklet (whose detections ended first) with a newer
one whose start overlaps the older's ghost prediction, requires appearance
affinity above the gate, and fills the temporal gap by constant-velocity
interpolation. The surviving tracklet keeps the older id, which is what
keeps reported identities stable through occlusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import AffinityWeights, mean_affinity_to_rows
from .core import BoundingBox, iou
from .lifecycle import ConfidenceConfig, Origin, Status, TrackState, Tracklet, is_positive


@dataclass(frozen=True)
class MergeCandidate:
    older: int       # tracklet id
    newer: int
    appearance: float
    gap: int         # newer's first frame minus older's last detected frame


def _eligible_pair(older: Tracklet, newer: Tracklet, ghost_limit: int) -> bool:
    """Loose motion gate: disjoint detected spans, bounded gap, ghost overlap > 0."""
    if newer.start_frame <= older.last_detected_frame:
        return False  # detected spans overlap (or wrong order)
    gap = newer.start_frame - older.last_detected_frame
    if gap < 1 or gap > ghost_limit:
        return False
    ghost = older.state_at(newer.start_frame)
    if ghost is None:
        return False
    first = newer.states[0].box
    return iou(ghost.box, first) > 0.0


def find_candidates(tracklets: list[Tracklet], weights: AffinityWeights,
                    confidence: ConfidenceConfig,
                    ghost_limit: int = 90) -> list[MergeCandidate]:
    """Enumerate merge candidates among positive tracklets (Alg. 2's candidate set)."""
    positive = [t for t in tracklets if t.status is not Status.MERGED
                and is_positive(t, confidence)]
    out = []
    for older in positive:
        for newer in positive:
            if newer.id == older.id or newer.status is Status.DEAD:
                continue
            if not newer.embeddings or not older.embeddings:
                continue
            if _eligible_pair(older, newer, ghost_limit):
                # mean over all cross pairs, via the cached history matrices
                aff = float(np.mean(mean_affinity_to_rows(
                    older.history_matrix(weights.n_max),
                    newer.history_matrix(weights.n_max))))
                out.append(MergeCandidate(older.id, newer.id, aff,
                                          newer.start_frame - older.last_detected_frame))
    return out


def interpolate_gap(older_last: tuple[int, BoundingBox],
                    newer_first: tuple[int, BoundingBox]) -> list[tuple[int, BoundingBox]]:
    """One constant-velocity box per missing frame between two anchor states.

    Center and size are interpolated linearly, so the midpoint box is the
    component-wise average of the endpoints.
    """
    (f0, b0), (f1, b1) = older_last, newer_first
    span = f1 - f0
    if span < 2:
        raise ValueError("nothing to interpolate")
    out = []
    for f in range(f0 + 1, f1):
        a = (f - f0) / span
        out.append((f, BoundingBox.from_center(
            b0.cx + a * (b1.cx - b0.cx),
            b0.cy + a * (b1.cy - b0.cy),
            b0.w + a * (b1.w - b0.w),
            b0.h + a * (b1.h - b0.h))))
    return out


def merge(older: Tracklet, newer: Tracklet):
    """Merge newer into older; older's id survives, newer is marked merged."""
    anchor = older.state_at(older.last_detected_frame)
    kept = [s for s in older.states if s.frame <= older.last_detected_frame]
    if newer.start_frame - anchor.frame >= 2:
        kept.extend(TrackState(f, box, Origin.INTERPOLATED)
                    for f, box in interpolate_gap((anchor.frame, anchor.box),
                                                  (newer.start_frame, newer.states[0].box)))
    kept.extend(newer.states)
    embeddings = older.embeddings + newer.embeddings
    older.rebuild_after_merge(kept, embeddings)

    older.adopt_motion(newer.motion)
    older.status = newer.status
    older.miss_count = newer.miss_count
    older.ghost_age = newer.ghost_age
    older.det_confidences = older.det_confidences + newer.det_confidences
    older.assignment_costs = older.assignment_costs + newer.assignment_costs
    older.refresh_stat_sums()
    if newer.last_boost_frame is not None:
        older.last_boost_frame = max(older.last_boost_frame or 0, newer.last_boost_frame)
    # Frames the newer tracklet already reported must not re-emit under the older id.
    older.emitted_frames |= newer.emitted_frames
    newer.status = Status.MERGED


def associate(tracklets: list[Tracklet], weights: AffinityWeights,
              confidence: ConfidenceConfig, ghost_limit: int = 90) -> int:
    """Greedy iterative merging; returns the number of merges performed.

    Older tracklets are processed in ascending start frame (ties by id) and
    each takes its best-appearance candidate above the gate; every merge
    restarts the scan, mirroring the restart semantics of the reference
    listing, until a full scan changes nothing.
    """
    by_id = {t.id: t for t in tracklets}
    merges = 0
    while True:
        candidates = find_candidates(tracklets, weights, confidence, ghost_limit)
        gated = [c for c in candidates if c.appearance > weights.tau_a]
        if not gated:
            return merges
        order = sorted({c.older for c in gated},
                       key=lambda tid: (by_id[tid].start_frame, tid))
        merged_this_scan = False
        for older_id in order:
            mine = [c for c in gated if c.older == older_id]
            if not mine:
                continue
            best = max(mine, key=lambda c: (c.appearance, -c.newer))
            merge(by_id[older_id], by_id[best.newer])
            merges += 1
            merged_this_scan = True
            break  # re-enter the scan with refreshed candidates
        if not merged_this_scan:
            return merges
