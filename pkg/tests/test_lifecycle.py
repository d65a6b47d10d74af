import numpy as np
import pytest

from trackkit.affinity import AffinityWeights, pair_affinity
from trackkit.core import BoundingBox, Detection, Embedding, Source
from trackkit.lifecycle import (ConfidenceConfig, Origin, Status, Tracklet,
                                advance_status, boost, boost_grid, is_positive)
from trackkit.motion import NoiseConfig

NOISE = NoiseConfig()


def unit(axis):
    v = np.zeros(128)
    v[axis] = 1.0
    return Embedding(v)


def grown_tracklet(n_detected, conf=0.9, emb=None, box=None):
    box = box or BoundingBox(0, 0, 30, 60)
    t = Tracklet(1, Detection(1, box, conf, embedding=emb), NOISE)
    for frame in range(2, n_detected + 1):
        t.advance_prediction(NOISE)
        t.record_match(Detection(frame, box, conf, embedding=emb), NOISE)
    return t


class FakeProvider:
    """Scores a box by IoU-free closeness to a designated 'true' location."""

    per_detection = True
    arbitrary_box = True

    def __init__(self, identity, true_box, fuzz=0.2):
        self.identity = identity
        self.true_box = true_box
        self.fuzz = fuzz

    def embed_box(self, frame, box):
        # identity embedding at the true box, degrading linearly with offset
        dist = abs(box.cx - self.true_box.cx) + abs(box.cy - self.true_box.cy)
        if dist < 1e-9 and abs(box.w - self.true_box.w) < 1e-9:
            return self.identity
        blend = self.identity.values + self.fuzz * (1 + dist / 10) * np.ones(128) / np.sqrt(128)
        return Embedding.normalized(blend)

    def embed_detections(self, frame, dets):
        return [self.embed_box(frame, d.box) for d in dets]


class TestIsPositive:
    def test_too_short(self):
        assert not is_positive(grown_tracklet(5), ConfidenceConfig())

    def test_low_confidence(self):
        assert not is_positive(grown_tracklet(6, conf=0.1), ConfidenceConfig())

    def test_all_gates_pass(self):
        assert is_positive(grown_tracklet(6, conf=0.9), ConfidenceConfig())

    def test_high_cost_negative(self):
        t = grown_tracklet(6)
        t.assignment_costs = [10.0] * 5
        t.refresh_stat_sums()
        assert not is_positive(t, ConfidenceConfig())

    def test_monotone_in_length(self):
        cfg = ConfidenceConfig()
        t = grown_tracklet(6, conf=0.9)
        was = is_positive(t, cfg)
        t.advance_prediction(NOISE)
        t.record_match(Detection(7, BoundingBox(0, 0, 30, 60), 0.95), NOISE)
        assert not was or is_positive(t, cfg)


class TestStatusMachine:
    def test_matched_stays_active(self):
        t = grown_tracklet(3)
        advance_status(t)
        assert t.status is Status.ACTIVE and t.miss_count == 0

    def test_two_misses_inactive_three_ghost(self):
        t = grown_tracklet(3)
        for expected in (Status.ACTIVE, Status.INACTIVE, Status.GHOST):
            t.advance_prediction(NOISE)
            t.record_miss(t.last_frame + 1, t.predicted_box())
            advance_status(t)
            assert t.status is expected

    def test_ghost_dies_after_limit(self):
        t = grown_tracklet(3)
        ghost_frames = 0
        for _ in range(200):
            if t.status is Status.DEAD:
                break
            t.advance_prediction(NOISE)
            t.record_miss(t.last_frame + 1, t.predicted_box())
            was_ghost = t.status is Status.GHOST
            advance_status(t, ghost_limit=90)
            if was_ghost or t.status is Status.GHOST:
                ghost_frames += 1
        assert t.status is Status.DEAD
        # 2 active/inactive misses + 90 ghost predictions stored
        predicted = [s for s in t.states if s.origin is Origin.PREDICTED]
        assert len(predicted) == 92

    def test_transitions_follow_allowed_edges(self):
        allowed = {(Status.ACTIVE, Status.INACTIVE), (Status.INACTIVE, Status.GHOST),
                   (Status.GHOST, Status.DEAD)}
        t = grown_tracklet(3)
        prev = t.status
        for _ in range(120):
            t.advance_prediction(NOISE)
            t.record_miss(t.last_frame + 1, t.predicted_box())
            advance_status(t)
            if t.status is not prev:
                assert (prev, t.status) in allowed
                prev = t.status
            if t.status is Status.DEAD:
                break
        assert t.status is Status.DEAD


class TestBoostGrid:
    def test_grid_size_and_center(self):
        box = BoundingBox(10, 10, 20, 40)
        grid = boost_grid(box)
        assert len(grid) == 75
        # scale 1.0, zero offsets reproduces the predicted box
        assert any(abs(g.cx - box.cx) < 1e-9 and abs(g.cy - box.cy) < 1e-9
                   and abs(g.w - box.w) < 1e-9 for g in grid)


class TestBoost:
    def make_boostable(self, identity):
        t = grown_tracklet(6, emb=identity)
        t.advance_prediction(NOISE)
        return t

    def test_picks_best_candidate(self):
        identity = unit(0)
        t = self.make_boostable(identity)
        provider = FakeProvider(identity, t.predicted_box())
        det = boost(t, 7, provider, AffinityWeights())
        assert det is not None
        assert det.source is Source.BOOSTED
        assert det.box.as_array() == pytest.approx(t.predicted_box().as_array())
        assert det.confidence > 0.895

    def test_all_below_gate_returns_none(self):
        identity = unit(0)
        t = self.make_boostable(identity)
        provider = FakeProvider(unit(1), t.predicted_box())  # wrong identity everywhere
        assert boost(t, 7, provider, AffinityWeights()) is None

    def test_rate_limited(self):
        identity = unit(0)
        t = self.make_boostable(identity)
        provider = FakeProvider(identity, t.predicted_box())
        first = boost(t, 7, provider, AffinityWeights())
        assert first is not None
        t.advance_prediction(NOISE)
        provider.true_box = t.predicted_box()
        assert boost(t, 8, provider, AffinityWeights()) is None  # 8 - 7 < 2
        t.advance_prediction(NOISE)
        provider.true_box = t.predicted_box()
        assert boost(t, 9, provider, AffinityWeights()) is not None

    def test_provider_without_arbitrary_box_disables(self):
        class Flat:
            per_detection = True
            arbitrary_box = False

        t = self.make_boostable(unit(0))
        assert boost(t, 7, Flat(), AffinityWeights()) is None

    def test_boosted_affinity_exceeds_gate(self):
        identity = unit(0)
        t = self.make_boostable(identity)
        provider = FakeProvider(identity, t.predicted_box())
        det = boost(t, 7, provider, AffinityWeights())
        assert pair_affinity(det.embedding, identity) > 0.895
