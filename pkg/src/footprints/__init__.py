"""Propagation of 3D pedestrian annotations into dense walkability labels.

Reprojects every person observation of a posed capture sequence into
every frame, splats the projections as Gaussian footprints, and ships
the loss kernels, evaluation metrics, and synthetic-scene oracle needed
to train and validate walkability models on the resulting maps.
"""

from .errors import (
    DuplicateFrameIndex,
    EmptyGroundTruth,
    EmptyLocations,
    FootprintsError,
    InfeasibleSpec,
    InvalidTransform,
    InvariantViolation,
    MalformedRecord,
    NonFiniteValue,
    ShapeMismatch,
    UnknownFrame,
)
from .evaluation import (
    MetricsReport,
    average_precision,
    expansion_metrics,
    kl_divergence,
    mean_ap,
    sample_locations,
    semantic_histogram,
)
from .geometry import (
    CameraIntrinsics,
    Pixel,
    RigidTransform,
    compose,
    invert,
    project,
    project_points,
    relative_transform,
)
from .losses import (
    ClassWeights,
    Discriminator,
    SamplerParams,
    cbl_loss,
    clamp_scores,
    class_weights,
    discriminator_eval,
    sample_hard_false_positives,
    wgan_gp_losses,
)
from .propagation import (
    DirectionMap,
    FootprintMap,
    PropagationParams,
    binarize,
    propagate_directions,
    propagate_footprints,
    walking_direction,
)
from .sequence_io import (
    Frame,
    PersonObservation,
    Sequence,
    parse_sequence,
    read_heatmap,
    read_metrics,
    sequence_to_bytes,
    write_heatmap,
    write_metrics,
    write_sequence,
)
from .synth import CameraPath, Rect, SceneSpec, coverage_check, generate_scene

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "CameraPath",
    "ClassWeights",
    "Discriminator",
    "DirectionMap",
    "DuplicateFrameIndex",
    "EmptyGroundTruth",
    "EmptyLocations",
    "FootprintMap",
    "FootprintsError",
    "Frame",
    "InfeasibleSpec",
    "InvalidTransform",
    "InvariantViolation",
    "MalformedRecord",
    "MetricsReport",
    "NonFiniteValue",
    "PersonObservation",
    "Pixel",
    "PropagationParams",
    "Rect",
    "RigidTransform",
    "SamplerParams",
    "SceneSpec",
    "Sequence",
    "ShapeMismatch",
    "UnknownFrame",
    "average_precision",
    "binarize",
    "cbl_loss",
    "clamp_scores",
    "class_weights",
    "compose",
    "coverage_check",
    "discriminator_eval",
    "expansion_metrics",
    "generate_scene",
    "invert",
    "kl_divergence",
    "mean_ap",
    "parse_sequence",
    "project",
    "project_points",
    "propagate_directions",
    "propagate_footprints",
    "read_heatmap",
    "read_metrics",
    "relative_transform",
    "sample_hard_false_positives",
    "sample_locations",
    "semantic_histogram",
    "sequence_to_bytes",
    "walking_direction",
    "wgan_gp_losses",
    "write_heatmap",
    "write_metrics",
    "write_sequence",
]
