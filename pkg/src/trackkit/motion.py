"""Constant-velocity Kalman filtering of tracklet box state.

State vector: (cx, cy, h, r, vcx, vcy, vh) - box center, height, aspect
ratio w/h, and velocities. Aspect ratio carries no velocity term: pedestrian
aspect is near-constant and an unobserved aspect velocity only adds drift
during long ghost-prediction runs. Observation vector: (cx, cy, h, r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundingBox

STATE_DIM = 7
OBS_DIM = 4

# x' = F x: position advanced by velocity, aspect constant.
_F = np.eye(STATE_DIM)
_F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
_H = np.eye(OBS_DIM, STATE_DIM)


@dataclass
class NoiseConfig:
    """Process/measurement noise standard deviations.

    The tracked paper-style pipeline gives no noise model, so these defaults
    are pinned here and in the tests: a 2-frame miss at typical pedestrian
    scales keeps IoU gating viable.
    """

    process_pos: float = 1.0       # px, applies to cx, cy, h
    process_aspect: float = 1e-2
    process_vel: float = 0.5       # px/frame
    meas_pos: float = 1.0          # px, applies to cx, cy, h
    meas_aspect: float = 1e-2
    init_vel_inflation: float = 10.0  # multiplier on process_vel for initial velocity stddev

    def __post_init__(self):
        for name in ("process_pos", "process_aspect", "process_vel",
                     "meas_pos", "meas_aspect"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        self._cache = {}

    def _memo(self, kind, stds):
        # fields stay mutable (config files assign them), so key by value
        cached = self._cache.get(kind)
        if cached is None or cached[0] != stds:
            cached = (stds, np.diag(np.square(stds)))
            self._cache[kind] = cached
        return cached[1]

    def process_cov(self) -> np.ndarray:
        return self._memo("q", (self.process_pos,) * 3
                          + (self.process_aspect,) + (self.process_vel,) * 3)

    def meas_cov(self) -> np.ndarray:
        return self._memo("r", (self.meas_pos,) * 3 + (self.meas_aspect,))


@dataclass
class MotionState:
    """Kalman mean and covariance for one tracklet."""

    mean: np.ndarray        # (7,)
    covariance: np.ndarray  # (7, 7)

    def to_box(self) -> BoundingBox:
        cx, cy, h, r = self.mean[:4]
        if h <= 0 or r <= 0:
            raise ValueError(f"state not convertible to a box: h={h}, r={r}")
        return BoundingBox.from_center(cx, cy, r * h, h)


def box_to_obs(box: BoundingBox) -> np.ndarray:
    return np.array([box.cx, box.cy, box.h, box.w / box.h], dtype=float)


def init_state(box: BoundingBox, noise: NoiseConfig) -> MotionState:
    """Start a track from a single observation: zero velocity, inflated velocity uncertainty."""
    mean = np.zeros(STATE_DIM)
    mean[:4] = box_to_obs(box)
    vel_std = noise.process_vel * noise.init_vel_inflation
    diag = [noise.meas_pos ** 2] * 3 + [noise.meas_aspect ** 2] + [vel_std ** 2] * 3
    return MotionState(mean, np.diag(diag).astype(float))


def predict(state: MotionState, noise: NoiseConfig) -> MotionState:
    """Advance one frame under constant velocity; covariance grows by process noise."""
    mean = _F @ state.mean
    cov = _F @ state.covariance @ _F.T + noise.process_cov()
    return MotionState(mean, 0.5 * (cov + cov.T))


def update(state: MotionState, measurement: BoundingBox,
           noise: NoiseConfig) -> tuple[MotionState, float]:
    """Standard linear Kalman correction against an observed box.

    Returns the corrected state and the assignment cost: the Mahalanobis norm
    of the innovation, which feeds the tracklet's mean-cost confidence filter.
    The observation picks the first four state components, so H-products
    reduce to slices (this runs once per matched tracklet per frame).
    """
    z = box_to_obs(measurement)
    innovation = z - state.mean[:4]
    meas_cov = noise.meas_cov()
    s = state.covariance[:4, :4] + meas_cov
    try:
        inv_s = np.linalg.inv(s)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate covariance") from exc
    cost = float(np.sqrt(max(innovation @ inv_s @ innovation, 0.0)))

    gain = state.covariance[:, :4] @ inv_s
    mean = state.mean + gain @ innovation
    # Joseph form keeps the covariance symmetric PSD under roundoff.
    factor = np.eye(STATE_DIM)
    factor[:, :4] -= gain
    cov = factor @ state.covariance @ factor.T + (gain * np.diag(meas_cov)) @ gain.T
    return MotionState(mean, 0.5 * (cov + cov.T)), cost
