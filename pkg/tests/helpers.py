"""Shared scenario drivers for pipeline and acceptance tests."""

import numpy as np

from trackkit.core import BoundingBox, Embedding
from trackkit.io import ScenarioData, SyntheticScenario, TargetSpec, generate_scenario
from trackkit.metrics import track_set_from_rows
from trackkit.pipeline import Tracker, TrackerConfig


def unit_embedding(axis):
    v = np.zeros(128)
    v[axis] = 1.0
    return Embedding(v)


def make_config(**overrides):
    """Config with a short emission delay so tests finish in few frames."""
    base = dict(emission_delay=20, association_period=20)
    base.update(overrides)
    return TrackerConfig(**base)


def run_tracker(data: ScenarioData, config: TrackerConfig, keep_match_log=False):
    """Feed a scenario through a fresh tracker; returns (tracker, frame results)."""
    tracker = Tracker(config, data.provider, keep_match_log=keep_match_log)
    lo, hi = data.frame_range
    results = [tracker.process_frame(f, data.detections.get(f, []))
               for f in range(lo, hi + 1)]
    results.extend(tracker.finalize())
    return tracker, results


def flat_records(results):
    return [rec for res in results for rec in res.tracks]


def hyp_track_set(results):
    return track_set_from_rows(
        (rec.frame, rec.track_id, rec.box) for rec in flat_records(results))


def linear_target(start, end, x0, y0, vx, vy=0.0, w=40.0, h=80.0,
                  visibility=None, embedding=None):
    """Constant-velocity target between two frames."""
    steps = end - start
    return TargetSpec(
        [(start, BoundingBox.from_center(x0, y0, w, h)),
         (end, BoundingBox.from_center(x0 + vx * steps, y0 + vy * steps, w, h))],
        visibility, embedding)


def drop_detections(data: ScenarioData, frames):
    """Clear detections on the given frames (detector dropouts), in place."""
    for frame in frames:
        data.detections[frame] = []
    return data


def single_target_scenario(n_frames=30, visibility=None, **scenario_kwargs):
    target = linear_target(1, n_frames, 100, 200, 4.0, visibility=visibility)
    return generate_scenario(SyntheticScenario([target], **scenario_kwargs), seed=1)
