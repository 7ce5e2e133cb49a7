"""Event-stream object tracking: rate coding + multi-channel correlation filters."""

from .cftracker import (
    FilterModel,
    LayerFilter,
    TrackerParams,
    TrajectoryEntry,
    detect,
    fuse_responses,
    make_label,
    parse_trajectory,
    track,
    train_filter,
    update_model,
    write_trajectory,
)
from .convnet import (
    ConvLayerSpec,
    FeatureStack,
    NetworkSpec,
    forward,
    load_network,
    random_network,
    save_network,
)
from .errors import EvtrackError, FormatError, WeightFormatError
from .evaluation import CLEReport, baseline_centroid_tracker, bench, evaluate
from .events import (
    DAVIS240,
    DVS128,
    Event,
    EventStream,
    GroundTruthEntry,
    SensorGeometry,
    parse_events,
    parse_ground_truth,
    write_events,
    write_ground_truth,
)
from .ratecode import RateMap, encode, to_input
from .segmentation import EventSegment, SegmentationPolicy, segment
from .synth import PRESETS, SceneSpec, generate_scene

__version__ = "0.1.0"

__all__ = [
    "CLEReport",
    "ConvLayerSpec",
    "DAVIS240",
    "DVS128",
    "Event",
    "EventSegment",
    "EventStream",
    "EvtrackError",
    "FeatureStack",
    "FilterModel",
    "FormatError",
    "GroundTruthEntry",
    "LayerFilter",
    "NetworkSpec",
    "PRESETS",
    "RateMap",
    "SceneSpec",
    "SegmentationPolicy",
    "SensorGeometry",
    "TrackerParams",
    "TrajectoryEntry",
    "WeightFormatError",
    "baseline_centroid_tracker",
    "bench",
    "detect",
    "encode",
    "evaluate",
    "forward",
    "fuse_responses",
    "generate_scene",
    "load_network",
    "make_label",
    "parse_events",
    "parse_ground_truth",
    "parse_trajectory",
    "random_network",
    "save_network",
    "segment",
    "to_input",
    "track",
    "train_filter",
    "update_model",
    "write_events",
    "write_ground_truth",
    "write_trajectory",
]
