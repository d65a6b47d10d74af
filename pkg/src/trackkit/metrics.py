"""CLEAR MOT evaluation: MOTA, FP, FN, ID switches, and throughput.

Correspondence persistence follows the standard CLEAR protocol: a pairing
from the previous frame is kept while its IoU stays at or above the
threshold; everything left over is matched by maximum-IoU assignment. An ID
switch is counted each time a ground-truth identity's matched hypothesis id
differs from the one it last matched, however long ago that was.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assignment import solve_max_assignment
from .core import BoundingBox, iou

# frame -> track id -> box
TrackSet = dict[int, dict[int, BoundingBox]]


@dataclass
class EvalReport:
    mota: float
    fp: int
    fn: int
    ids: int
    gt_count: int
    fps: Optional[float] = None  # reported by the caller from run timings

    def as_dict(self) -> dict:
        return {"mota": self.mota, "fp": self.fp, "fn": self.fn, "ids": self.ids,
                "gt_count": self.gt_count, "fps": self.fps}


def evaluate(gt: TrackSet, hyp: TrackSet, iou_threshold: float = 0.5) -> EvalReport:
    """Score a hypothesis track set against ground truth.

    Evaluation runs over the ground truth's frame range; hypothesis boxes on
    frames outside it count as false positives.
    """
    fp = fn = ids = gt_count = 0
    if not gt:
        fp = sum(len(boxes) for boxes in hyp.values())
        return EvalReport(0.0, fp, 0, 0, 0)

    lo, hi = min(gt), max(gt)
    fp += sum(len(boxes) for f, boxes in hyp.items() if f < lo or f > hi)

    prev_corr: dict[int, int] = {}
    last_matched: dict[int, int] = {}
    for frame in range(lo, hi + 1):
        gt_boxes = gt.get(frame, {})
        hyp_boxes = hyp.get(frame, {})
        gt_count += len(gt_boxes)

        corr: dict[int, int] = {}
        for g, h in prev_corr.items():
            if g in gt_boxes and h in hyp_boxes and h not in corr.values():
                if iou(gt_boxes[g], hyp_boxes[h]) >= iou_threshold:
                    corr[g] = h

        free_gt = sorted(g for g in gt_boxes if g not in corr)
        free_hyp = sorted(h for h in hyp_boxes if h not in corr.values())
        if free_gt and free_hyp:
            matrix = np.zeros((len(free_gt), len(free_hyp)))
            for r, g in enumerate(free_gt):
                for c, h in enumerate(free_hyp):
                    value = iou(gt_boxes[g], hyp_boxes[h])
                    if value >= iou_threshold:
                        matrix[r, c] = value
            for r, c in solve_max_assignment(matrix).pairs:
                corr[free_gt[r]] = free_hyp[c]

        for g, h in corr.items():
            if g in last_matched and last_matched[g] != h:
                ids += 1
            last_matched[g] = h

        fp += len(hyp_boxes) - len(corr)
        fn += len(gt_boxes) - len(corr)
        prev_corr = corr

    mota = 1.0 - (fp + fn + ids) / gt_count if gt_count > 0 else 0.0
    return EvalReport(mota, fp, fn, ids, gt_count)


def throughput(frame_count: int, elapsed_seconds: float) -> float:
    """Update frequency in frames per second."""
    if elapsed_seconds <= 0:
        raise ValueError("elapsed time must be positive")
    return frame_count / elapsed_seconds


def track_set_from_rows(rows) -> TrackSet:
    """Build a TrackSet from (frame, track_id, box) triples."""
    out: TrackSet = {}
    for frame, tid, box in rows:
        out.setdefault(frame, {})[tid] = box
    return out
