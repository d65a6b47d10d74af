"""Per-frame tracking orchestration with delayed online emission.

Each frame runs: predict, NMS, embed, gated assignment, optional boosting
with a restricted re-assignment, status advance, periodic association, and
emission of confirmed states once they cross the delay horizon. One Tracker
instance handles one sequence and must be called with consecutive frames;
separate sequences get separate instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

from . import association as assoc
from .affinity import AffinityWeights
from .assignment import build_affinity_matrix, solve_max_assignment
from .core import BoundingBox, Detection, Source, iou, nms
from .errors import ConfigError
from .lifecycle import (ConfidenceConfig, Origin, Status, Tracklet,
                        advance_status, boost, is_positive)
from .motion import NoiseConfig

_EMITTABLE = (Origin.DETECTED, Origin.BOOSTED, Origin.INTERPOLATED)


@dataclass
class TrackerConfig:
    """Every tracking threshold and period, with library defaults."""

    lambda_: float = 0.5
    tau_m: float = 0.3
    tau_a: float = 0.895
    tau_l: int = 6
    tau_c: float = 0.2
    n_max: int = 20
    max_misses: int = 2
    ghost_limit: int = 90
    association_period: int = 20
    association_enabled: bool = True
    boost_enabled: bool = False
    boost_min_gap: int = 2
    nms_iou: float = 0.5
    max_mean_cost: float = 4.0
    emission_delay: int = 40
    appearance_enabled: bool = True
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    _RANGES = {
        "lambda_": ("lambda must be in [0, 1]", lambda v: 0 <= v <= 1),
        "tau_m": ("tau_m must be in [0, 1]", lambda v: 0 <= v <= 1),
        "tau_a": ("tau_a must be in [-1, 1]", lambda v: -1 <= v <= 1),
        "tau_l": ("tau_l must be >= 1", lambda v: v >= 1),
        "tau_c": ("tau_c must be in [0, 1]", lambda v: 0 <= v <= 1),
        "n_max": ("n_max must be >= 1", lambda v: v >= 1),
        "max_misses": ("max_misses must be >= 1", lambda v: v >= 1),
        "ghost_limit": ("ghost_limit must be >= 1", lambda v: v >= 1),
        "association_period": ("association_period must be >= 1", lambda v: v >= 1),
        "boost_min_gap": ("boost_min_gap must be >= 1", lambda v: v >= 1),
        "nms_iou": ("nms_iou must be in [0, 1]", lambda v: 0 <= v <= 1),
        "max_mean_cost": ("max_mean_cost must be > 0", lambda v: v > 0),
    }

    def validate(self):
        for name, (message, ok) in self._RANGES.items():
            if not ok(getattr(self, name)):
                raise ConfigError(message)
        if self.emission_delay < self.association_period:
            raise ConfigError("emission_delay must be >= association_period")

    def weights(self) -> AffinityWeights:
        return AffinityWeights(self.lambda_, self.tau_m, self.tau_a, self.n_max)

    def confidence(self) -> ConfidenceConfig:
        return ConfidenceConfig(self.tau_l, self.tau_c, self.max_mean_cost)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrackerConfig":
        data = dict(data)
        if "lambda" in data:
            data["lambda_"] = data.pop("lambda")
        noise = data.pop("noise", None)
        cfg = cls(**data)
        if isinstance(noise, dict):
            cfg.noise = NoiseConfig(**noise)
        elif noise is not None:
            cfg.noise = noise
        return cfg


@dataclass(frozen=True)
class TrackRecord:
    """One emitted state; carries its own frame since late merges can flush
    states older than the current horizon."""

    frame: int
    track_id: int
    box: BoundingBox
    origin: Origin


@dataclass
class FrameResult:
    frame: int
    tracks: list[TrackRecord]


@dataclass(frozen=True)
class MatchLogEntry:
    frame: int
    stage: int  # 1 = detector assignment, 2 = boost re-assignment
    tracklet_id: int
    detection_index: int
    motion_affinity: float
    appearance_affinity: Optional[float]
    total: float


class Tracker:
    """Online tracker over one sequence of consecutive frames."""

    def __init__(self, config: TrackerConfig, provider=None, keep_match_log=False):
        config.validate()
        self.config = config
        self.provider = provider
        self.tracklets: list[Tracklet] = []
        self.next_id = 1
        self.last_frame: Optional[int] = None
        self.match_log: Optional[list[MatchLogEntry]] = [] if keep_match_log else None
        self.provider_calls = 0
        self.finalized = False

    # -- frame processing -----------------------------------------------------

    def process_frame(self, frame: int, detections: list[Detection]) -> FrameResult:
        if self.finalized:
            raise RuntimeError("tracker already finalized")
        if self.last_frame is None:
            if frame < 1:
                raise ValueError("non-monotonic frame: frames are 1-indexed")
        elif frame != self.last_frame + 1:
            raise ValueError(f"non-monotonic frame: expected {self.last_frame + 1}, got {frame}")
        if any(d.frame != frame for d in detections):
            raise ValueError("detections must all carry the current frame index")
        self.last_frame = frame
        cfg = self.config

        live = [t for t in self.tracklets
                if t.status in (Status.ACTIVE, Status.INACTIVE, Status.GHOST)]
        for t in live:
            t.advance_prediction(cfg.noise)
            if t.predicted_box() is None:
                t.status = Status.DEAD  # geometry degenerated during ghosting

        dets = nms(detections, cfg.nms_iou)
        if cfg.appearance_enabled:
            self._attach_embeddings(frame, dets)

        active = [t for t in live if t.status is Status.ACTIVE]
        matrix = build_affinity_matrix(active, dets, cfg.weights(), cfg.appearance_enabled)
        matching = solve_max_assignment(matrix)
        self._log_matches(frame, 1, active, dets, matrix, matching)

        matched_tracklets = {active[r].id for r, _ in matching.pairs}
        for r, c in matching.pairs:
            active[r].record_match(dets[c], cfg.noise)
        unmatched_dets = [dets[c] for c in matching.unmatched_cols]

        if cfg.boost_enabled:
            leftovers = [active[r] for r in matching.unmatched_rows]
            matched_tracklets |= {t.id for t in self._boost_pass(frame, leftovers, dets)}

        for t in live:
            if t.id not in matched_tracklets and t.status is not Status.DEAD:
                t.record_miss(frame, t.predicted_box())
        for det in unmatched_dets:
            if det.source is Source.DETECTOR:
                self.tracklets.append(Tracklet(self.next_id, det, cfg.noise))
                self.next_id += 1

        for t in live:
            if t.status is not Status.DEAD:
                advance_status(t, cfg.max_misses, cfg.ghost_limit)
        self._prune_hopeless()

        if cfg.association_enabled and frame % cfg.association_period == 0:
            self._associate()

        return FrameResult(frame, self._emit(frame - cfg.emission_delay))

    def _attach_embeddings(self, frame: int, dets: list[Detection]):
        missing = [d for d in dets if d.embedding is None]
        if not missing:
            return
        if self.provider is None or not getattr(self.provider, "per_detection", False):
            raise ValueError("missing embedding: appearance enabled but no capable provider")
        embeddings = self.provider.embed_detections(frame, missing)
        self.provider_calls += 1
        for det, emb in zip(missing, embeddings):
            det.embedding = emb

    def _boost_pass(self, frame: int, unmatched: list[Tracklet],
                    kept_dets: list[Detection]) -> list[Tracklet]:
        """Propose boosted detections for unmatched positive tracklets, suppress
        against the kept detector detections, and re-assign the unmatched rows."""
        cfg = self.config
        confidence = cfg.confidence()
        proposals = []
        for t in unmatched:
            if is_positive(t, confidence):
                det = boost(t, frame, self.provider, cfg.weights(), cfg.boost_min_gap)
                if det is not None:
                    proposals.append(det)
        if not proposals:
            return []

        # Union NMS: detector detections are already kept, so they seed the
        # suppression set; boosted proposals must clear them and each other.
        survivors = []
        for det in sorted(proposals, key=lambda d: -d.confidence):
            others = [k.box for k in kept_dets] + [s.box for s in survivors]
            if all(iou(det.box, b) <= cfg.nms_iou for b in others):
                survivors.append(det)
        if not survivors:
            return []

        matrix = build_affinity_matrix(unmatched, survivors, cfg.weights(),
                                       cfg.appearance_enabled)
        matching = solve_max_assignment(matrix)
        self._log_matches(frame, 2, unmatched, survivors, matrix, matching)
        matched = []
        for r, c in matching.pairs:
            unmatched[r].record_match(survivors[c], cfg.noise)
            matched.append(unmatched[r])
        return matched  # leftover boosted proposals are dropped, never spawned

    def _log_matches(self, frame, stage, tracklets, dets, matrix, matching):
        if self.match_log is None:
            return
        for r, c in matching.pairs:
            a_a = matrix.appearance[r, c]
            self.match_log.append(MatchLogEntry(
                frame, stage, tracklets[r].id, dets[c].index,
                float(matrix.motion[r, c]),
                None if a_a != a_a else float(a_a),  # NaN -> None
                float(matrix.values[r, c])))

    def _prune_hopeless(self):
        """Drop tracklets that can no longer be reported or merged.

        Once a tracklet leaves the active pool its states are frozen, so a
        non-positive one can never become positive: it would only ever consume
        ghost predictions. Dropping it does not change any output.
        """
        confidence = self.config.confidence()
        self.tracklets = [
            t for t in self.tracklets
            if t.status is Status.ACTIVE
            or (t.status is not Status.MERGED and is_positive(t, confidence))
        ]

    def _associate(self):
        assoc.associate(self.tracklets, self.config.weights(),
                        self.config.confidence(), self.config.ghost_limit)
        self.tracklets = [t for t in self.tracklets if t.status is not Status.MERGED]

    def _emit(self, horizon: int) -> list[TrackRecord]:
        if horizon < 1:
            return []
        confidence = self.config.confidence()
        records = []
        for t in self.tracklets:
            if not is_positive(t, confidence):
                continue  # scan pointer stays put until the tracklet qualifies
            while t.emit_idx < len(t.states) and t.states[t.emit_idx].frame <= horizon:
                state = t.states[t.emit_idx]
                t.emit_idx += 1
                if state.origin in _EMITTABLE and state.frame not in t.emitted_frames:
                    t.emitted_frames.add(state.frame)
                    records.append(TrackRecord(state.frame, t.id, state.box, state.origin))
        records.sort(key=lambda rec: (rec.frame, rec.track_id))
        return records

    def finalize(self) -> list[FrameResult]:
        """Run a last association pass and flush everything still inside the
        delay horizon."""
        if self.finalized:
            return []
        self.finalized = True
        if self.last_frame is None:
            return []
        if self.config.association_enabled:
            self._associate()
        records = self._emit(self.last_frame)
        return [FrameResult(self.last_frame, records)] if records else []
