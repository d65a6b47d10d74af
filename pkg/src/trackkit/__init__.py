"""trackkit: online multi-object tracking with a learned appearance metric.

The tracking core is detector- and model-agnostic: detections come from MOT
files or synthetic scenarios, and appearance embeddings come from a pluggable
provider (sidecar files, scenario oracles, or an external embedding network).
"""

from .affinity import (AffinityWeights, pair_affinity, total_affinity,
                       tracklet_detection_affinity, tracklet_tracklet_affinity)
from .assignment import build_affinity_matrix, solve_max_assignment
from .core import BoundingBox, Detection, Embedding, Source, iou, nms
from .errors import ConfigError, InputError, TrackkitError
from .io import (DetectionData, NullProvider, ScenarioProvider, SidecarProvider,
                 SyntheticScenario, TargetSpec, generate_scenario, load_scenario,
                 read_detections, read_embeddings, read_ground_truth,
                 read_track_file, write_embeddings, write_tracks)
from .lifecycle import ConfidenceConfig, Origin, Status, Tracklet, is_positive
from .metrics import EvalReport, evaluate, throughput, track_set_from_rows
from .motion import MotionState, NoiseConfig
from .pipeline import FrameResult, TrackRecord, Tracker, TrackerConfig

__version__ = "0.1.0"

__all__ = [
    "AffinityWeights", "BoundingBox", "ConfidenceConfig", "ConfigError",
    "Detection", "DetectionData", "Embedding", "EvalReport", "FrameResult",
    "InputError", "MotionState", "NoiseConfig", "NullProvider", "Origin",
    "ScenarioProvider", "SidecarProvider", "Source", "Status", "SyntheticScenario",
    "TargetSpec", "TrackRecord", "Tracker", "TrackerConfig", "Tracklet",
    "TrackkitError", "build_affinity_matrix", "evaluate", "generate_scenario",
    "iou", "is_positive", "load_scenario", "nms", "pair_affinity",
    "read_detections", "read_embeddings", "read_ground_truth", "read_track_file",
    "solve_max_assignment", "throughput", "total_affinity",
    "track_set_from_rows", "tracklet_detection_affinity",
    "tracklet_tracklet_affinity", "write_embeddings", "write_tracks",
]
