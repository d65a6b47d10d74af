"""MOT-format ingestion/emission, embedding sidecars, providers, and synthetic scenarios.

File grammars are documented in docs/formats.md. Detection files follow the
MOTChallenge CSV convention (frame,id,x,y,w,h,conf,...; id is -1 for raw
detections); the embedding sidecar is a parallel CSV keyed by frame and the
detection's row position within that frame, which keeps detection files
interchangeable with standard MOT inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BoundingBox, Detection, Embedding, EMBED_DIM, iou
from .errors import InputError
from .metrics import TrackSet

log = logging.getLogger(__name__)

SIDECAR_NORM_TOL = 1e-3


# ---------------------------------------------------------------------------
# MOT CSV reading/writing
# ---------------------------------------------------------------------------

@dataclass
class DetectionData:
    """Detections grouped by frame, plus bookkeeping for sidecar alignment."""

    frames: dict[int, list[Detection]]
    skipped: int = 0     # rows rejected for non-positive width/height
    row_count: int = 0   # total data rows in the file, including skipped ones


def _parse_row(line: str, lineno: int, min_fields: int) -> list[float]:
    parts = line.split(",")
    if len(parts) < min_fields:
        raise InputError(f"line {lineno}: expected at least {min_fields} fields, "
                         f"got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise InputError(f"line {lineno}: {exc}") from None


def read_detections(path) -> DetectionData:
    """Read a MOT detection file into per-frame lists, preserving input order.

    Rows with non-positive width or height are dropped with a warning; any
    other malformed row is an error naming its line number.
    """
    frames: dict[int, list[Detection]] = {}
    counters: dict[int, int] = {}
    skipped = 0
    rows = 0
    try:
        handle = open(path)
    except OSError as exc:
        raise InputError(f"cannot read detections: {exc}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            vals = _parse_row(line, lineno, 7)
            rows += 1
            frame = int(vals[0])
            index = counters.get(frame, 0)
            counters[frame] = index + 1
            if vals[4] <= 0 or vals[5] <= 0:
                skipped += 1
                continue
            box = BoundingBox(vals[2], vals[3], vals[4], vals[5])
            frames.setdefault(frame, []).append(
                Detection(frame, box, vals[6], index=index))
    if skipped:
        log.warning("dropped %d detection rows with non-positive size", skipped)
    return DetectionData(dict(sorted(frames.items())), skipped, rows)


def write_tracks(results, path):
    """Write emitted track states in the MOT result convention.

    Lines are frame,id,x,y,w,h,1,-1,-1,-1 with two-decimal geometry, sorted by
    frame then id, so a write/read round trip is exact at that precision.
    """
    records = []
    for result in results:
        records.extend(result.tracks)
    records.sort(key=lambda r: (r.frame, r.track_id))
    with open(path, "w") as handle:
        for rec in records:
            b = rec.box
            handle.write(f"{rec.frame},{rec.track_id},"
                         f"{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},1,-1,-1,-1\n")


def read_track_file(path) -> TrackSet:
    """Read a MOT result file (valid ids) into a frame -> id -> box mapping."""
    out: TrackSet = {}
    try:
        handle = open(path)
    except OSError as exc:
        raise InputError(f"cannot read tracks: {exc}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            vals = _parse_row(line, lineno, 6)
            if vals[4] <= 0 or vals[5] <= 0:
                raise InputError(f"line {lineno}: non-positive box size")
            out.setdefault(int(vals[0]), {})[int(vals[1])] = BoundingBox(
                vals[2], vals[3], vals[4], vals[5])
    return out


def read_ground_truth(path) -> TrackSet:
    """Read a MOT ground-truth file, honoring its evaluability columns.

    When present, column 7 is the consider flag (0 excludes the row) and
    column 8 the object class (only pedestrians, class 1, or unlabeled -1 are
    kept), matching the MOT16 ground-truth convention.
    """
    out: TrackSet = {}
    try:
        handle = open(path)
    except OSError as exc:
        raise InputError(f"cannot read ground truth: {exc}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            vals = _parse_row(line, lineno, 6)
            if len(vals) >= 7 and vals[6] == 0:
                continue
            if len(vals) >= 8 and int(vals[7]) not in (1, -1):
                continue
            if vals[4] <= 0 or vals[5] <= 0:
                raise InputError(f"line {lineno}: non-positive box size")
            out.setdefault(int(vals[0]), {})[int(vals[1])] = BoundingBox(
                vals[2], vals[3], vals[4], vals[5])
    return out


def write_ground_truth(gt: TrackSet, path):
    with open(path, "w") as handle:
        for frame in sorted(gt):
            for tid in sorted(gt[frame]):
                b = gt[frame][tid]
                handle.write(f"{frame},{tid},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},1,1,1\n")


def write_detections(data: DetectionData, path):
    with open(path, "w") as handle:
        for frame in sorted(data.frames):
            for det in data.frames[frame]:
                b = det.box
                handle.write(f"{frame},-1,{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
                             f"{det.confidence:.6f},-1,-1,-1\n")


# ---------------------------------------------------------------------------
# Embedding sidecar
# ---------------------------------------------------------------------------

def read_embeddings(path) -> dict[tuple[int, int], Embedding]:
    """Read an embedding sidecar: frame,det_index,v1..v128 per row.

    Vectors within 1e-3 of unit norm are re-normalized; anything further off
    is a hard error, as is a wrong component count.
    """
    out: dict[tuple[int, int], Embedding] = {}
    try:
        handle = open(path)
    except OSError as exc:
        raise InputError(f"cannot read embeddings: {exc}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 + EMBED_DIM:
                raise InputError(f"line {lineno}: expected {2 + EMBED_DIM} fields, "
                                 f"got {len(parts)}")
            try:
                frame, index = int(parts[0]), int(parts[1])
                vec = np.array([float(p) for p in parts[2:]])
            except ValueError as exc:
                raise InputError(f"line {lineno}: {exc}") from None
            norm = float(np.linalg.norm(vec))
            if abs(norm - 1.0) > SIDECAR_NORM_TOL:
                raise InputError(f"line {lineno}: non-normalized embedding "
                                 f"(|v| = {norm:.6f})")
            out[(frame, index)] = Embedding(vec / norm)
    return out


def write_embeddings(table: dict[tuple[int, int], Embedding], path):
    with open(path, "w") as handle:
        for (frame, index) in sorted(table):
            vals = ",".join(f"{v:.9g}" for v in table[(frame, index)].values)
            handle.write(f"{frame},{index},{vals}\n")


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------

class NullProvider:
    """Provider for the appearance-disabled ablation; must never be queried."""

    per_detection = False
    arbitrary_box = False

    def embed_detections(self, frame, detections):
        raise RuntimeError("null provider queried; appearance should be disabled")

    def embed_box(self, frame, box):
        raise RuntimeError("null provider queried; appearance should be disabled")


class SidecarProvider:
    """Serves embeddings from a sidecar file keyed by (frame, detection index).

    Cannot embed arbitrary boxes, so detection boosting is unavailable with
    file-based inputs; that capability needs pixel access (see embed_box).
    """

    per_detection = True
    arbitrary_box = False

    def __init__(self, table: dict[tuple[int, int], Embedding]):
        self.table = table

    @classmethod
    def from_files(cls, detections: DetectionData, sidecar_path) -> "SidecarProvider":
        table = read_embeddings(sidecar_path)
        if len(table) != detections.row_count:
            raise InputError(f"sidecar misaligned: {len(table)} rows for "
                             f"{detections.row_count} detection rows")
        for frame, dets in detections.frames.items():
            for det in dets:
                if (frame, det.index) not in table:
                    raise InputError(f"sidecar misaligned: no row for frame {frame} "
                                     f"detection {det.index}")
        return cls(table)

    def embed_detections(self, frame, detections):
        try:
            return [self.table[(frame, det.index)] for det in detections]
        except KeyError as exc:
            raise InputError(f"missing embedding for frame {frame}, "
                             f"detection {exc.args[0][1]}") from None

    def embed_box(self, frame, box):
        return None


# ---------------------------------------------------------------------------
# Synthetic scenarios
# ---------------------------------------------------------------------------

@dataclass
class TargetSpec:
    """One simulated target: a piecewise-linear box path plus visibility windows."""

    waypoints: list[tuple[int, BoundingBox]]
    visibility: Optional[list[tuple[int, int]]] = None  # inclusive; None = always
    embedding: Optional[Embedding] = None

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("target needs at least one waypoint")
        frames = [f for f, _ in self.waypoints]
        if frames != sorted(frames) or len(set(frames)) != len(frames):
            raise ValueError("waypoints must have strictly increasing frames")

    @property
    def span(self) -> tuple[int, int]:
        return self.waypoints[0][0], self.waypoints[-1][0]

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        lo, hi = self.span
        if frame < lo or frame > hi:
            return None
        for (f0, b0), (f1, b1) in zip(self.waypoints, self.waypoints[1:]):
            if f0 <= frame <= f1:
                a = 0.0 if f1 == f0 else (frame - f0) / (f1 - f0)
                return BoundingBox.from_center(
                    b0.cx + a * (b1.cx - b0.cx), b0.cy + a * (b1.cy - b0.cy),
                    b0.w + a * (b1.w - b0.w), b0.h + a * (b1.h - b0.h))
        return self.waypoints[-1][1]

    def visible_at(self, frame: int) -> bool:
        if self.box_at(frame) is None:
            return False
        if self.visibility is None:
            return True
        return any(a <= frame <= b for a, b in self.visibility)


@dataclass
class SyntheticScenario:
    """Scenario description: targets plus detector and embedding noise models."""

    targets: list[TargetSpec]
    jitter_std: float = 0.0            # px, on detection x/y
    false_positive_rate: float = 0.0   # expected clutter detections per frame
    false_negative_rate: float = 0.0   # per-target drop probability
    embedding_noise: float = 0.0       # stddev before re-normalization
    overlap_falloff: float = 0.05      # extra noise per unit of lost overlap
    min_identity_distance: float = 0.5
    bounds: tuple[int, int] = (1920, 1080)
    confidence_range: tuple[float, float] = (0.7, 1.0)
    clutter_confidence_range: tuple[float, float] = (0.3, 0.8)


class ScenarioProvider:
    """Ground-truth-aware embedding oracle for synthetic sequences.

    A queried box overlapping a visible target returns that identity's
    embedding (IoU-nearest target wins) perturbed by the configured noise
    plus an extra term growing as overlap degrades, so appearance carries a
    localization signal the way a real crop embedding does; anything else
    gets a clutter embedding. Results depend only on the seed, frame, and
    box, so repeated queries are identical across runs.
    """

    per_detection = True
    arbitrary_box = True

    def __init__(self, targets: dict[int, TargetSpec], noise: float, seed: int,
                 overlap_falloff: float = 0.05):
        self.targets = targets
        self.noise = noise
        self.overlap_falloff = overlap_falloff
        self.seed = seed

    def _rng(self, frame: int, box: BoundingBox) -> np.random.Generator:
        key = struct.pack("<qq4d", self.seed, frame, box.x, box.y, box.w, box.h)
        digest = hashlib.blake2b(key, digest_size=8).digest()
        return np.random.default_rng(int.from_bytes(digest, "little"))

    def embed_box(self, frame: int, box: BoundingBox) -> Embedding:
        best_id, best_iou = None, 0.0
        for tid in sorted(self.targets):
            spec = self.targets[tid]
            if not spec.visible_at(frame):
                continue
            value = iou(box, spec.box_at(frame))
            if value > best_iou:
                best_id, best_iou = tid, value
        if best_id is not None:
            identity = self.targets[best_id].embedding.values
            std = self.noise + (1.0 - best_iou) * self.overlap_falloff
            if std == 0:
                return Embedding(identity)
            rng = self._rng(frame, box)
            return Embedding.normalized(identity + rng.normal(0, std, EMBED_DIM))
        return Embedding.normalized(self._rng(frame, box).standard_normal(EMBED_DIM))

    def embed_detections(self, frame, detections):
        return [self.embed_box(frame, det.box) for det in detections]


@dataclass
class ScenarioData:
    detections: dict[int, list[Detection]]
    provider: ScenarioProvider
    ground_truth: TrackSet
    frame_range: tuple[int, int]

    def detection_data(self) -> DetectionData:
        rows = sum(len(v) for v in self.detections.values())
        return DetectionData(self.detections, 0, rows)


def _identity_bank(scenario: SyntheticScenario, rng: np.random.Generator) -> list[Embedding]:
    """Fill in missing identity embeddings, keeping pairwise distances apart."""
    chosen = [t.embedding for t in scenario.targets]
    for i, spec in enumerate(scenario.targets):
        if chosen[i] is not None:
            continue
        for _ in range(1000):
            cand = Embedding.normalized(rng.standard_normal(EMBED_DIM))
            ok = all(other is None or
                     np.linalg.norm(cand.values - other.values) >= scenario.min_identity_distance
                     for j, other in enumerate(chosen) if j != i)
            if ok:
                chosen[i] = cand
                break
        else:
            raise ValueError("could not separate identity embeddings; "
                             "lower min_identity_distance")
    return chosen


def generate_scenario(scenario: SyntheticScenario, seed: int) -> ScenarioData:
    """Render a scenario into detections, an embedding provider, and ground truth.

    Deterministic in the seed: the random stream is consumed in a fixed order
    regardless of drop outcomes.
    """
    rng = np.random.default_rng(seed)
    identities = _identity_bank(scenario, rng)
    targets = {}
    for tid, (spec, emb) in enumerate(zip(scenario.targets, identities), start=1):
        targets[tid] = TargetSpec(spec.waypoints, spec.visibility, emb)

    if not targets:
        provider = ScenarioProvider({}, scenario.embedding_noise, seed,
                                    scenario.overlap_falloff)
        return ScenarioData({}, provider, {}, (1, 0))

    lo = min(t.span[0] for t in targets.values())
    hi = max(t.span[1] for t in targets.values())
    gt: TrackSet = {}
    detections: dict[int, list[Detection]] = {}
    conf_lo, conf_hi = scenario.confidence_range
    clut_lo, clut_hi = scenario.clutter_confidence_range
    width, height = scenario.bounds

    for frame in range(lo, hi + 1):
        frame_dets: list[Detection] = []
        for tid in sorted(targets):
            spec = targets[tid]
            box = spec.box_at(frame)
            if box is None:
                continue
            gt.setdefault(frame, {})[tid] = box
            drop = rng.random() < scenario.false_negative_rate
            dx, dy = rng.normal(0, scenario.jitter_std or 0.0, 2) if scenario.jitter_std else (0.0, 0.0)
            conf = rng.uniform(conf_lo, conf_hi)
            if spec.visible_at(frame) and not drop:
                jittered = BoundingBox(box.x + dx, box.y + dy, box.w, box.h)
                frame_dets.append(Detection(frame, jittered, conf,
                                            index=len(frame_dets)))
        for _ in range(rng.poisson(scenario.false_positive_rate)):
            w = rng.uniform(30, 120)
            h = rng.uniform(60, 220)
            x = rng.uniform(0, max(width - w, 1))
            y = rng.uniform(0, max(height - h, 1))
            conf = rng.uniform(clut_lo, clut_hi)
            frame_dets.append(Detection(frame, BoundingBox(x, y, w, h), conf,
                                        index=len(frame_dets)))
        detections[frame] = frame_dets

    provider = ScenarioProvider(targets, scenario.embedding_noise, seed,
                                scenario.overlap_falloff)
    return ScenarioData(detections, provider, gt, (lo, hi))


def load_scenario(path) -> SyntheticScenario:
    """Load a scenario description from its JSON file (grammar in docs/formats.md)."""
    try:
        with open(path) as handle:
            data = json.load(handle)
    except OSError as exc:
        raise InputError(f"cannot read scenario: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid scenario JSON: {exc}") from None
    try:
        targets = []
        for entry in data["targets"]:
            waypoints = [(int(f), BoundingBox(*map(float, box)))
                         for f, box in entry["waypoints"]]
            visibility = entry.get("visibility")
            if visibility is not None:
                visibility = [(int(a), int(b)) for a, b in visibility]
            targets.append(TargetSpec(waypoints, visibility))
        kwargs = {}
        for key in ("jitter_std", "false_positive_rate", "false_negative_rate",
                    "embedding_noise", "overlap_falloff", "min_identity_distance"):
            if key in data:
                kwargs[key] = float(data[key])
        if "bounds" in data:
            kwargs["bounds"] = (int(data["bounds"][0]), int(data["bounds"][1]))
        return SyntheticScenario(targets, **kwargs)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid scenario field: {exc}") from None
