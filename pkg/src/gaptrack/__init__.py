"""Probabilistic multi-object tracking with learned motion and gap inpainting.

The pipeline: cluster track velocities into a codebook (``codebook.fit``),
train the autoregressive motion model on box tracks (``training.train``),
then run the two-pass tracker over detection files (``tracker.run_sequence``)
and score the output (``metrics.evaluate``). Synthetic scenes for all of it
come from ``synth.generate``.
"""

from .assignment import FORBIDDEN, solve
from .codebook import (
    ClusterIndexQuad,
    Codebook,
    decode,
    fit,
    load_codebook,
    quantize,
    quantize_array,
    save_codebook,
)
from .config import RunConfig, apply_overrides, from_dict, from_file, load_config
from .errors import (
    CodebookMismatchError,
    ConfigError,
    DegenerateBoxError,
    EmptyInputError,
    GaptrackError,
    GeometryError,
    MetricsInputError,
    NumericOverflowError,
    ParseError,
    SchemaError,
    SequencingError,
    TrainingDivergedError,
)
from .geometry import (
    COMPONENTS,
    BoundingBox,
    FrameGeometry,
    VelocityDelta,
    apply_velocity,
    boxes_to_array,
    iou,
    iou_matrix,
    velocities_from_boxes,
    velocity,
)
from .metrics import MetricsReport, aggregate, evaluate, format_report, write_report
from .mot_io import (
    Detection,
    GroundTruthBox,
    SequenceMeta,
    discover_sequence,
    read_detections,
    read_ground_truth,
    read_labeled_boxes,
    read_seqinfo,
    write_detections,
    write_ground_truth,
    write_results,
    write_seqinfo,
)
from .motion_model import (
    ModelConfig,
    ModelWeights,
    RecurrentState,
    argmax_quad,
    init_state,
    init_weights,
    load_weights,
    log_likelihood,
    sample,
    save_weights,
    step,
)
from .scoring import (
    InpaintCandidate,
    InpaintParams,
    Tracklet,
    TrackletBox,
    advance,
    inpaint,
    new_tracklet,
    reattach,
    sample_candidates,
    score_candidate_detection,
    score_detection,
    t_trs_for_frame_rate,
)
from .synth import Scene, SceneSpec, drop_detections, generate, scene_variant
from .tracker import (
    FrameResult,
    SequenceResult,
    TrackerConfig,
    TrackerState,
    make_state,
    process_frame,
    run_sequence,
)
from .training import TrainingTrack, TrainSchedule, next_step_accuracy, train

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ClusterIndexQuad",
    "Codebook",
    "CodebookMismatchError",
    "COMPONENTS",
    "ConfigError",
    "DegenerateBoxError",
    "Detection",
    "EmptyInputError",
    "FORBIDDEN",
    "FrameGeometry",
    "FrameResult",
    "GaptrackError",
    "GeometryError",
    "GroundTruthBox",
    "InpaintCandidate",
    "InpaintParams",
    "MetricsInputError",
    "MetricsReport",
    "ModelConfig",
    "ModelWeights",
    "NumericOverflowError",
    "ParseError",
    "RecurrentState",
    "RunConfig",
    "Scene",
    "SceneSpec",
    "SchemaError",
    "SequenceMeta",
    "SequenceResult",
    "SequencingError",
    "TrackerConfig",
    "TrackerState",
    "Tracklet",
    "TrackletBox",
    "TrainSchedule",
    "TrainingDivergedError",
    "TrainingTrack",
    "VelocityDelta",
    "advance",
    "aggregate",
    "apply_overrides",
    "apply_velocity",
    "argmax_quad",
    "boxes_to_array",
    "decode",
    "discover_sequence",
    "drop_detections",
    "evaluate",
    "fit",
    "format_report",
    "from_dict",
    "from_file",
    "generate",
    "init_state",
    "init_weights",
    "inpaint",
    "iou",
    "iou_matrix",
    "load_codebook",
    "load_config",
    "load_weights",
    "log_likelihood",
    "make_state",
    "new_tracklet",
    "next_step_accuracy",
    "process_frame",
    "quantize",
    "quantize_array",
    "read_detections",
    "read_ground_truth",
    "read_labeled_boxes",
    "read_seqinfo",
    "reattach",
    "run_sequence",
    "sample",
    "sample_candidates",
    "save_codebook",
    "save_weights",
    "scene_variant",
    "score_candidate_detection",
    "score_detection",
    "solve",
    "step",
    "t_trs_for_frame_rate",
    "train",
    "velocities_from_boxes",
    "velocity",
    "write_detections",
    "write_ground_truth",
    "write_report",
    "write_results",
    "write_seqinfo",
]
