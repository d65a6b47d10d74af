import itertools
import math

import numpy as np
import pytest

from trackkit.core import BoundingBox
from trackkit.metrics import EvalReport, evaluate, throughput, track_set_from_rows


# --------------------------------------------------------------------------
# Independent reference: same CLEAR protocol, but exhaustive-correspondence
# matching per frame and its own IoU, sharing no code with the module.
# --------------------------------------------------------------------------

def ref_iou(a, b):
    ax1, ay1, ax2, ay2 = a.x, a.y, a.x + a.w, a.y + a.h
    bx1, by1, bx2, by2 = b.x, b.y, b.x + b.w, b.y + b.h
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.w * a.h + b.w * b.h - inter)


def ref_best_matching(gt_items, hyp_items, threshold):
    """Exhaustive max-total-IoU injective mapping over valid pairs."""
    best_pairs, best_total = [], -1.0
    n = len(gt_items)
    for k in range(min(n, len(hyp_items)), -1, -1):
        for gsub in itertools.combinations(range(n), k):
            for hperm in itertools.permutations(range(len(hyp_items)), k):
                total = 0.0
                pairs = []
                ok = True
                for gi, hi in zip(gsub, hperm):
                    v = ref_iou(gt_items[gi][1], hyp_items[hi][1])
                    if v < threshold:
                        ok = False
                        break
                    total += v
                    pairs.append((gt_items[gi][0], hyp_items[hi][0]))
                if ok and total > best_total:
                    best_total, best_pairs = total, pairs
    return best_pairs


def ref_evaluate(gt, hyp, threshold=0.5):
    fp = fn = ids = gt_count = 0
    if not gt:
        return sum(len(v) for v in hyp.values()), 0, 0, 0
    lo, hi = min(gt), max(gt)
    fp += sum(len(v) for f, v in hyp.items() if f < lo or f > hi)
    prev = {}
    last = {}
    for frame in range(lo, hi + 1):
        gt_boxes = gt.get(frame, {})
        hyp_boxes = hyp.get(frame, {})
        gt_count += len(gt_boxes)
        corr = {}
        for g, h in prev.items():
            if g in gt_boxes and h in hyp_boxes and \
                    ref_iou(gt_boxes[g], hyp_boxes[h]) >= threshold:
                corr[g] = h
        free_g = [(g, gt_boxes[g]) for g in sorted(gt_boxes) if g not in corr]
        free_h = [(h, hyp_boxes[h]) for h in sorted(hyp_boxes)
                  if h not in corr.values()]
        for g, h in ref_best_matching(free_g, free_h, threshold):
            corr[g] = h
        for g, h in corr.items():
            if g in last and last[g] != h:
                ids += 1
            last[g] = h
        fp += len(hyp_boxes) - len(corr)
        fn += len(gt_boxes) - len(corr)
        prev = corr
    return fp, fn, ids, gt_count


def box(x, y=0.0, w=10.0, h=10.0):
    return BoundingBox(x, y, w, h)


class TestEvaluate:
    def test_perfect_tracking(self):
        gt = track_set_from_rows([(f, 1, box(2 * f)) for f in range(1, 6)])
        report = evaluate(gt, gt)
        assert report.mota == 1.0
        assert (report.fp, report.fn, report.ids) == (0, 0, 0)

    def test_gt_against_itself_is_error_free(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            rows = [(f, tid, box(28.0 * tid + rng.uniform(-5, 5), rng.uniform(0, 6)))
                    for f in range(1, int(rng.integers(2, 7)))
                    for tid in range(1, int(rng.integers(2, 5)))
                    if rng.random() < 0.9]
            gt = track_set_from_rows(rows)
            report = evaluate(gt, gt)
            assert (report.fp, report.fn, report.ids) == (0, 0, 0)
            if report.gt_count:
                assert report.mota == 1.0

    def test_empty_hypothesis(self):
        gt = track_set_from_rows([(f, 1, box(0)) for f in range(1, 11)])
        report = evaluate(gt, {})
        assert report.fn == 10 and report.mota == 0.0

    def test_swap_counts_two_switches(self):
        # hyp ids swap at frame 3 and stay swapped: one switch per gt identity
        gt_rows, hyp_rows = [], []
        for f in range(1, 6):
            gt_rows += [(f, 1, box(0, 0)), (f, 2, box(100, 0))]
            a, b = (1, 2) if f < 3 else (2, 1)
            hyp_rows += [(f, a, box(0, 0)), (f, b, box(100, 0))]
        report = evaluate(track_set_from_rows(gt_rows), track_set_from_rows(hyp_rows))
        assert report.ids == 2
        assert report.fp == 0 and report.fn == 0

    def test_switch_counted_across_gap(self):
        rows_gt = [(f, 1, box(0)) for f in (1, 2, 3, 4, 5)]
        rows_hyp = [(1, 10, box(0)), (2, 10, box(0)), (4, 11, box(0)), (5, 11, box(0))]
        report = evaluate(track_set_from_rows(rows_gt), track_set_from_rows(rows_hyp))
        assert report.ids == 1
        assert report.fn == 1  # frame 3 uncovered

    def test_hyp_outside_gt_range_counts_fp(self):
        gt = track_set_from_rows([(2, 1, box(0))])
        hyp = track_set_from_rows([(2, 1, box(0)), (9, 1, box(0))])
        report = evaluate(gt, hyp)
        assert report.fp == 1

    def test_persistence_beats_greedy_iou(self):
        # frame 2 offers a slightly better-IoU competitor; the previous
        # correspondence persists because it still clears the threshold
        gt = track_set_from_rows([(1, 1, box(0)), (2, 1, box(0))])
        hyp = track_set_from_rows([(1, 5, box(1)), (2, 5, box(1)), (2, 6, box(0))])
        report = evaluate(gt, hyp)
        assert report.ids == 0
        assert report.fp == 1  # the competitor goes unmatched

    def test_mota_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            gt_rows, hyp_rows = [], []
            for f in range(1, 5):
                for tid in range(1, 4):
                    gt_rows.append((f, tid, box(30.0 * tid + rng.uniform(-2, 2),
                                                rng.uniform(0, 3))))
                    if rng.random() < 0.8:
                        hyp_rows.append((f, tid + 10,
                                         box(30.0 * tid + rng.uniform(-3, 3),
                                             rng.uniform(0, 3))))
            report = evaluate(track_set_from_rows(gt_rows), track_set_from_rows(hyp_rows))
            expected = 1 - (report.fp + report.fn + report.ids) / report.gt_count
            assert report.mota == pytest.approx(expected, abs=1e-12)

    def test_deleting_hyp_never_decreases_fn(self):
        rng = np.random.default_rng(1)
        gt_rows = [(f, tid, box(25.0 * tid, rng.uniform(0, 2)))
                   for f in range(1, 5) for tid in range(1, 4)]
        hyp_rows = [(f, tid + 20, box(25.0 * tid + rng.uniform(-2, 2)))
                    for f in range(1, 5) for tid in range(1, 4)]
        gt = track_set_from_rows(gt_rows)
        full = evaluate(gt, track_set_from_rows(hyp_rows))
        pruned = evaluate(gt, track_set_from_rows(hyp_rows[:-4]))
        assert pruned.fn >= full.fn
        assert pruned.fp <= full.fp

    def test_oracle_small_scenarios(self):
        rng = np.random.default_rng(99)
        for _ in range(150):
            n_tracks = int(rng.integers(1, 4))
            n_frames = int(rng.integers(1, 6))
            gt_rows, hyp_rows = [], []
            for f in range(1, n_frames + 1):
                for tid in range(1, n_tracks + 1):
                    base = 40.0 * tid
                    if rng.random() < 0.85:
                        gt_rows.append((f, tid, box(base + rng.uniform(-4, 4),
                                                    rng.uniform(0, 4))))
                    if rng.random() < 0.85:
                        hid = tid if rng.random() < 0.7 else int(rng.integers(1, 5))
                        hyp_rows.append((f, hid, box(base + rng.uniform(-4, 4),
                                                     rng.uniform(0, 4))))
            gt = track_set_from_rows(gt_rows)
            hyp = track_set_from_rows(hyp_rows)
            report = evaluate(gt, hyp)
            fp, fn, ids, gt_count = ref_evaluate(gt, hyp)
            assert (report.fp, report.fn, report.ids, report.gt_count) == \
                (fp, fn, ids, gt_count)
            if gt_count:
                assert report.mota == pytest.approx(
                    1 - (fp + fn + ids) / gt_count, abs=1e-12)


class TestThroughput:
    def test_division(self):
        assert throughput(100, 5.0) == 20.0

    def test_zero_frames(self):
        assert throughput(0, 2.0) == 0.0

    def test_paper_shape(self):
        assert throughput(600, 30.3) == pytest.approx(19.8, abs=0.01)

    def test_zero_elapsed_rejected(self):
        with pytest.raises(ValueError):
            throughput(10, 0.0)
