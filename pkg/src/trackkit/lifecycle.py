"""Tracklet state, confidence filtering, status transitions, and detection boosting."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import motion
from .affinity import AffinityWeights, select_history, stacked, tracklet_detection_affinity
from .core import BoundingBox, Detection, Embedding, Source


class Origin(enum.Enum):
    DETECTED = "detected"
    BOOSTED = "boosted"
    PREDICTED = "predicted"
    INTERPOLATED = "interpolated"


class Status(enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"
    GHOST = "ghost"
    DEAD = "dead"
    MERGED = "merged"


# Observation-backed states count toward track length and are reportable.
OBSERVED = (Origin.DETECTED, Origin.BOOSTED)


@dataclass(frozen=True)
class TrackState:
    frame: int
    box: BoundingBox
    origin: Origin


@dataclass
class ConfidenceConfig:
    """Gates separating positive (reportable) tracklets from negatives."""

    tau_l: int = 6              # minimum observation-backed states
    tau_c: float = 0.2          # minimum mean detection confidence
    max_mean_cost: float = 4.0  # maximum mean Mahalanobis assignment cost

    def __post_init__(self):
        if self.tau_l < 1:
            raise ValueError("tau_l must be >= 1")
        if not 0.0 <= self.tau_c <= 1.0:
            raise ValueError("tau_c must be in [0, 1]")
        if self.max_mean_cost <= 0:
            raise ValueError("max_mean_cost must be > 0")


class Tracklet:
    """One identity hypothesis: motion state, per-frame history, embeddings, stats.

    States are appended once per frame while the tracklet is alive, so frames
    are strictly increasing with no gaps. Embeddings are stored only for
    observation-backed states, never for pure predictions.
    """

    def __init__(self, tid: int, det: Detection, noise: motion.NoiseConfig):
        self.id = tid
        self.states: list[TrackState] = [TrackState(det.frame, det.box, Origin.DETECTED)]
        self.embeddings: list[tuple[int, Embedding]] = []
        if det.embedding is not None:
            self.embeddings.append((det.frame, det.embedding))
        self.motion = motion.init_state(det.box, noise)
        self.status = Status.ACTIVE
        self.miss_count = 0
        self.ghost_age = 0
        self.det_confidences: list[float] = [det.confidence]
        self.assignment_costs: list[float] = []
        self.last_boost_frame: Optional[int] = None
        self.detected_count = 1
        self.last_detected_frame = det.frame
        self.emitted_frames: set[int] = set()
        self.emit_idx = 0  # emission scan pointer into states
        self._conf_sum = det.confidence
        self._cost_sum = 0.0
        self._by_frame = {det.frame: self.states[0]}
        self._hist_cache: Optional[tuple[int, np.ndarray]] = None
        self._pred_box: Optional[BoundingBox] = None
        self._pred_box_dirty = True

    # -- queries ------------------------------------------------------------

    @property
    def start_frame(self) -> int:
        return self.states[0].frame

    @property
    def last_frame(self) -> int:
        return self.states[-1].frame

    def state_at(self, frame: int) -> Optional[TrackState]:
        return self._by_frame.get(frame)

    def embedding_list(self) -> list[Embedding]:
        return [e for _, e in self.embeddings]

    def history_matrix(self, n_max: int) -> Optional[np.ndarray]:
        """Stacked (n, 128) matrix of the selected embedding subset.

        Cached per n_max; a single appended embedding extends the cached
        matrix instead of restacking the whole selection.
        """
        if not self.embeddings:
            return None
        count = len(self.embeddings)
        if self._hist_cache is not None and self._hist_cache[0] == n_max:
            _, mat, cached_count = self._hist_cache
            if cached_count == count:
                return mat
            if cached_count == count - 1:
                newest = self.embeddings[-1][1].values[None, :]
                if count <= n_max:
                    mat = np.concatenate((mat, newest))
                else:
                    # selection is first + most recent n_max-1: shift the window
                    mat = np.concatenate((mat[:1], mat[2:], newest))
                self._hist_cache = (n_max, mat, count)
                return mat
        mat = stacked(select_history(self.embedding_list(), n_max))
        self._hist_cache = (n_max, mat, count)
        return mat

    def predicted_box(self) -> Optional[BoundingBox]:
        if self._pred_box_dirty:
            try:
                self._pred_box = self.motion.to_box()
            except ValueError:
                self._pred_box = None  # degenerate ghost geometry; retire the track
            self._pred_box_dirty = False
        return self._pred_box

    def mean_confidence(self) -> float:
        return self._conf_sum / len(self.det_confidences)

    def mean_cost(self) -> float:
        if not self.assignment_costs:
            return 0.0
        return self._cost_sum / len(self.assignment_costs)

    # -- per-frame mutation (pipeline thread only) ---------------------------

    def advance_prediction(self, noise: motion.NoiseConfig):
        self.motion = motion.predict(self.motion, noise)
        self._pred_box_dirty = True

    def record_match(self, det: Detection, noise: motion.NoiseConfig):
        origin = Origin.BOOSTED if det.source is Source.BOOSTED else Origin.DETECTED
        self.motion, cost = motion.update(self.motion, det.box, noise)
        self._pred_box_dirty = True
        self._append_state(TrackState(det.frame, det.box, origin))
        if det.embedding is not None:
            # history_matrix extends its cache incrementally from the new count
            self.embeddings.append((det.frame, det.embedding))
        self.det_confidences.append(det.confidence)
        self.assignment_costs.append(cost)
        self._conf_sum += det.confidence
        self._cost_sum += cost
        self.miss_count = 0
        self.detected_count += 1
        self.last_detected_frame = det.frame

    def record_miss(self, frame: int, predicted: BoundingBox):
        self._append_state(TrackState(frame, predicted, Origin.PREDICTED))
        self.miss_count += 1

    def _append_state(self, state: TrackState):
        if self.states and state.frame <= self.states[-1].frame:
            raise ValueError(f"state frames must increase: {state.frame} after {self.last_frame}")
        self.states.append(state)
        self._by_frame[state.frame] = state

    def rebuild_after_merge(self, states: list[TrackState],
                            embeddings: list[tuple[int, Embedding]]):
        self.states = states
        self._by_frame = {s.frame: s for s in states}
        self.embeddings = embeddings
        self._hist_cache = None
        self.emit_idx = 0
        self.detected_count = sum(1 for s in states if s.origin in OBSERVED)
        self.last_detected_frame = max(s.frame for s in states if s.origin in OBSERVED)

    def refresh_stat_sums(self):
        self._conf_sum = float(sum(self.det_confidences))
        self._cost_sum = float(sum(self.assignment_costs))

    def adopt_motion(self, state: motion.MotionState):
        self.motion = state
        self._pred_box_dirty = True


def is_positive(t: Tracklet, cfg: ConfidenceConfig) -> bool:
    """Length, mean-confidence, and mean-assignment-cost gates, all required."""
    return (t.detected_count >= cfg.tau_l
            and t.mean_confidence() >= cfg.tau_c
            and t.mean_cost() <= cfg.max_mean_cost)


def advance_status(t: Tracklet, max_misses: int = 2, ghost_limit: int = 90):
    """Step the status machine after a frame's assignment has been applied.

    active -> inactive once max_misses consecutive predictions went unassigned;
    inactive -> ghost on the next miss; ghost tracklets keep predicting (states
    tracked internally, never reported) for ghost_limit frames, then die.
    """
    if t.status is Status.ACTIVE and t.miss_count >= max_misses:
        t.status = Status.INACTIVE
    elif t.status is Status.INACTIVE and t.miss_count > max_misses:
        t.status = Status.GHOST
        t.ghost_age = 1
    elif t.status is Status.GHOST:
        t.ghost_age += 1
    if t.status is Status.GHOST and t.ghost_age >= ghost_limit:
        t.status = Status.DEAD


# Dense-sampling grid for boosting: 5x5 fractional center offsets crossed with
# 3 scales of the predicted box, enumerated scale-major then dy then dx so an
# affinity tie resolves to the smallest grid index.
_OFFSETS = (-0.5, -0.25, 0.0, 0.25, 0.5)
_SCALES = (0.9, 1.0, 1.1)


def boost_grid(box: BoundingBox) -> list[BoundingBox]:
    grid = []
    for s in _SCALES:
        for fy in _OFFSETS:
            for fx in _OFFSETS:
                grid.append(BoundingBox.from_center(
                    box.cx + fx * box.w, box.cy + fy * box.h, box.w * s, box.h * s))
    return grid


def boost(t: Tracklet, frame: int, provider, weights: AffinityWeights,
          min_gap: int = 2) -> Optional[Detection]:
    """Propose a detection for an unmatched positive tracklet by appearance.

    Samples the candidate grid around the predicted box and returns the
    candidate with maximal appearance affinity, provided it clears the
    appearance gate and the once-per-min_gap-frames rate limit. Returns None
    when the provider cannot embed arbitrary boxes (boosting disabled).
    """
    if not getattr(provider, "arbitrary_box", False):
        return None
    if t.last_boost_frame is not None and frame - t.last_boost_frame < min_gap:
        return None
    predicted = t.predicted_box()
    if predicted is None or not t.embeddings:
        return None

    stored = select_history(t.embedding_list(), weights.n_max)
    best: Optional[tuple[float, BoundingBox, Embedding]] = None
    for candidate in boost_grid(predicted):
        emb = provider.embed_box(frame, candidate)
        if emb is None:
            continue
        score = tracklet_detection_affinity(stored, emb, weights.n_max)
        if best is None or score > best[0]:
            best = (score, candidate, emb)

    if best is None or best[0] <= weights.tau_a:
        return None
    t.last_boost_frame = frame
    return Detection(frame, best[1], confidence=best[0], embedding=best[2],
                     source=Source.BOOSTED)
