import itertools
import math

import numpy as np
import pytest

from trackkit.affinity import AffinityWeights
from trackkit.assignment import (apply_matching, build_affinity_matrix,
                                 solve_max_assignment)
from trackkit.core import BoundingBox, Detection, Embedding
from trackkit.lifecycle import Tracklet
from trackkit.motion import NoiseConfig


def brute_force_max(values):
    """Exhaustive-permutation optimum over partial matchings (entries >= 0)."""
    j, i = values.shape
    best = 0.0
    if j <= i:
        for cols in itertools.permutations(range(i), j):
            total = math.fsum(values[r, c] for r, c in enumerate(cols) if values[r, c] > 0)
            best = max(best, total)
    else:
        for rows in itertools.permutations(range(j), i):
            total = math.fsum(values[r, c] for c, r in enumerate(rows) if values[r, c] > 0)
            best = max(best, total)
    return best


def unit(axis):
    v = np.zeros(128)
    v[axis] = 1.0
    return Embedding(v)


def make_tracklet(tid, box, emb=None, frame=1):
    det = Detection(frame, box, 0.9, embedding=emb)
    return Tracklet(tid, det, NoiseConfig())


class TestSolver:
    def test_single_entry(self):
        m = solve_max_assignment(np.array([[0.9]]))
        assert m.pairs == [(0, 0)]

    def test_two_by_two(self):
        m = solve_max_assignment(np.array([[0.9, 0.1], [0.2, 0.8]]))
        assert sorted(m.pairs) == [(0, 0), (1, 1)]

    def test_zero_row_unmatched(self):
        m = solve_max_assignment(np.array([[0.0, 0.0], [0.2, 0.8]]))
        assert 0 in m.unmatched_rows
        assert all(r != 0 for r, _ in m.pairs)

    def test_empty(self):
        m = solve_max_assignment(np.zeros((0, 3)))
        assert m.pairs == [] and m.unmatched_cols == [0, 1, 2]

    def test_partial_bijection(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            vals = rng.uniform(0, 1, (int(rng.integers(1, 6)), int(rng.integers(1, 6))))
            vals[rng.uniform(size=vals.shape) < 0.3] = 0.0
            m = solve_max_assignment(vals)
            rows = [r for r, _ in m.pairs]
            cols = [c for _, c in m.pairs]
            assert len(rows) == len(set(rows)) and len(cols) == len(set(cols))
            assert all(vals[r, c] > 0 for r, c in m.pairs)

    def test_oracle_equivalence(self):
        # exhaustive-permutation oracle, exact optimum equality via fsum
        rng = np.random.default_rng(123)
        for _ in range(300):
            j = int(rng.integers(1, 6))
            i = int(rng.integers(1, 6))
            vals = rng.uniform(0, 1, (j, i))
            vals[rng.uniform(size=vals.shape) < 0.25] = 0.0
            m = solve_max_assignment(vals)
            total = math.fsum(vals[r, c] for r, c in m.pairs)
            assert total == brute_force_max(vals)


class TestBuildMatrix:
    def test_hand_entry(self):
        # IoU([0,0,10,20],[1,0,10,20]) = 180/220; identical embeddings; lambda 0.5
        weights = AffinityWeights()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 20), unit(0))
        d = Detection(2, BoundingBox(1, 0, 10, 20), 0.9, embedding=unit(0))
        matrix = build_affinity_matrix([t], [d], weights)
        expected = 0.5 * 1.0 + 0.5 * (180 / 220)
        assert matrix.values[0, 0] == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(0.909, abs=1e-3)

    def test_motion_gate_blocks(self):
        # IoU 0.2 < tau_m even with perfect appearance
        weights = AffinityWeights()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 10), unit(0))
        d = Detection(2, BoundingBox(0, 20, 10, 10), 0.9, embedding=unit(0))
        matrix = build_affinity_matrix([t], [d], weights)
        assert matrix.values[0, 0] == 0.0

    def test_disjoint_boxes_blocked_despite_appearance(self):
        weights = AffinityWeights()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 10), unit(0))
        d = Detection(2, BoundingBox(500, 500, 10, 10), 0.9, embedding=unit(0))
        assert build_affinity_matrix([t], [d], weights).values[0, 0] == 0.0

    def test_appearance_gate_blocks(self):
        weights = AffinityWeights()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 20), unit(0))
        d = Detection(2, BoundingBox(0, 0, 10, 20), 0.9, embedding=unit(1))
        assert build_affinity_matrix([t], [d], weights).values[0, 0] == 0.0

    def test_appearance_disabled_uses_motion_alone(self):
        weights = AffinityWeights()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 20))
        d = Detection(2, BoundingBox(0, 0, 10, 20), 0.9)
        matrix = build_affinity_matrix([t], [d], weights, appearance_enabled=False)
        assert matrix.values[0, 0] == pytest.approx(1.0)

    def test_missing_embedding_rejected(self):
        weights = AffinityWeights()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 20), unit(0))
        d = Detection(2, BoundingBox(0, 0, 10, 20), 0.9)
        with pytest.raises(ValueError, match="missing embedding"):
            build_affinity_matrix([t], [d], weights)

    def test_tracklet_without_history_gates_on_motion(self):
        weights = AffinityWeights()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 20))  # spawned without embedding
        d = Detection(2, BoundingBox(0, 0, 10, 20), 0.9, embedding=unit(0))
        matrix = build_affinity_matrix([t], [d], weights)
        assert matrix.values[0, 0] == pytest.approx(1.0)

    def test_gate_soundness_random(self):
        weights = AffinityWeights()
        rng = np.random.default_rng(9)
        for _ in range(50):
            tracklets = [make_tracklet(i + 1,
                                       BoundingBox(*rng.uniform(0, 100, 2), 20, 40),
                                       Embedding.normalized(rng.standard_normal(128)))
                         for i in range(4)]
            dets = [Detection(2, BoundingBox(*rng.uniform(0, 100, 2), 20, 40), 0.9,
                              embedding=Embedding.normalized(rng.standard_normal(128)),
                              index=k)
                    for k in range(5)]
            matrix = build_affinity_matrix(tracklets, dets, weights)
            matched = solve_max_assignment(matrix)
            for r, c in matched.pairs:
                assert matrix.motion[r, c] > weights.tau_m
                assert matrix.appearance[r, c] > weights.tau_a

    def test_lambda_argmax_prefers_appearance(self):
        # motion affinities tie exactly across both permutations; appearance differs
        weights = AffinityWeights(lambda_=0.5)
        box = BoundingBox(0, 0, 10, 20)
        t1 = make_tracklet(1, box, unit(0))
        t2 = make_tracklet(2, box, unit(1))
        near0 = Embedding.normalized(np.eye(128)[0] * 10 + np.eye(128)[1])
        near1 = Embedding.normalized(np.eye(128)[1] * 10 + np.eye(128)[0])
        d1 = Detection(2, box, 0.9, embedding=near0, index=0)
        d2 = Detection(2, box, 0.9, embedding=near1, index=1)
        matrix = build_affinity_matrix([t1, t2], [d1, d2], weights)
        assert np.allclose(matrix.motion, matrix.motion[0, 0])  # all-tie motion
        m = solve_max_assignment(matrix)
        assert sorted(m.pairs) == [(0, 0), (1, 1)]


class TestApplyMatching:
    def test_match_updates_and_resets_miss(self):
        noise = NoiseConfig()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 20), unit(0))
        t.advance_prediction(noise)
        t.record_miss(2, t.predicted_box())
        t.advance_prediction(noise)
        d = Detection(3, BoundingBox(0, 0, 10, 20), 0.8, embedding=unit(0), index=0)
        matching = solve_max_assignment(np.array([[0.9]]))
        apply_matching([t], [d], matching, 3, noise, next_id=2)
        assert t.miss_count == 0
        assert len(t.states) == 3
        assert t.detected_count == 2

    def test_cold_start_spawns(self):
        noise = NoiseConfig()
        dets = [Detection(1, BoundingBox(0, 0, 10, 20), 0.9, index=0),
                Detection(1, BoundingBox(50, 0, 10, 20), 0.9, index=1)]
        matching = solve_max_assignment(np.zeros((0, 2)))
        spawned, next_id = apply_matching([], dets, matching, 1, noise, next_id=1)
        assert [t.id for t in spawned] == [1, 2]
        assert next_id == 3

    def test_no_detections_means_miss(self):
        noise = NoiseConfig()
        t = make_tracklet(1, BoundingBox(0, 0, 10, 20))
        t.advance_prediction(noise)
        matching = solve_max_assignment(np.zeros((1, 0)))
        spawned, _ = apply_matching([t], [], matching, 2, noise, next_id=2)
        assert spawned == []
        assert t.miss_count == 1
        assert t.states[-1].box.as_array() == pytest.approx([0, 0, 10, 20])
