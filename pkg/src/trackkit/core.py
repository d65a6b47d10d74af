"""Fundamental geometric and observational types: boxes, detections, embeddings."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EMBED_DIM = 128
UNIT_NORM_TOL = 1e-5


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned image-plane box, (left, top, width, height) in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate box: w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)


class Embedding:
    """Unit-norm appearance feature vector on the 128-d hypersphere.

    Pairwise Euclidean distance is therefore bounded to [0, 2], which bounds
    the derived affinity 1 - d to [-1, 1].
    """

    __slots__ = ("values",)

    def __init__(self, values):
        vec = np.asarray(values, dtype=float)
        if vec.shape != (EMBED_DIM,):
            raise ValueError(f"embedding must have {EMBED_DIM} components, got {vec.shape}")
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"embedding not unit-norm: |v| = {norm:.6f}")
        self.values = vec

    @classmethod
    def normalized(cls, values) -> "Embedding":
        """Build an embedding by l2-normalizing an arbitrary non-zero vector."""
        vec = np.asarray(values, dtype=float)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("cannot normalize a zero vector")
        return cls(vec / norm)

    def __eq__(self, other):
        return isinstance(other, Embedding) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Embedding({self.values[:3].round(4)}...)"


class Source(enum.Enum):
    DETECTOR = "detector"
    BOOSTED = "boosted"


@dataclass
class Detection:
    """One candidate observation for a single frame."""

    frame: int
    box: BoundingBox
    confidence: float
    embedding: Optional[Embedding] = None
    source: Source = Source.DETECTOR
    index: int = field(default=-1, compare=False)  # position within its frame's input order

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frames are 1-indexed, got {self.frame}")
        if self.source is Source.BOOSTED and self.embedding is None:
            raise ValueError("boosted detections must carry an embedding")


def iou(b1: BoundingBox, b2: BoundingBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    ix = min(b1.x + b1.w, b2.x + b2.w) - max(b1.x, b2.x)
    iy = min(b1.y + b1.h, b2.y + b2.h) - max(b1.y, b2.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (b1.area + b2.area - inter)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (N, 4) arrays of xywh boxes."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    ax1, ay1 = a[:, 0], a[:, 1]
    ax2, ay2 = a[:, 0] + a[:, 2], a[:, 1] + a[:, 3]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = b[:, 0] + b[:, 2], b[:, 1] + b[:, 3]
    ix = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(ax1[:, None], bx1[None, :])
    iy = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(ay1[:, None], by1[None, :])
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    areas_a = (a[:, 2] * a[:, 3])[:, None]
    areas_b = (b[:, 2] * b[:, 3])[None, :]
    return inter / (areas_a + areas_b - inter)


def nms(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression.

    Detections are visited in descending confidence (ties: input order); one is
    kept iff its IoU with every already-kept detection is <= iou_threshold.
    Kept detections are returned unchanged, in their original input order.
    """
    if len(detections) <= 1:
        return list(detections)
    boxes = np.stack([d.box.as_array() for d in detections])
    overlaps = iou_matrix(boxes, boxes)
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    kept: list[int] = []
    for i in order:
        if all(overlaps[i, k] <= iou_threshold for k in kept):
            kept.append(i)
    return [detections[i] for i in sorted(kept)]
