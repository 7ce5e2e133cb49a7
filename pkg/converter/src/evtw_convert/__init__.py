"""Checkpoint to EVTW weight-file converter."""

from .convert import (
    VGG_CHAIN,
    ConvertError,
    ExtractedLayer,
    MissingLayer,
    ShapeMismatch,
    convert,
    extract_layers,
    extract_means,
    load_checkpoint,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "VGG_CHAIN",
    "ConvertError",
    "ExtractedLayer",
    "MissingLayer",
    "ShapeMismatch",
    "convert",
    "extract_layers",
    "extract_means",
    "load_checkpoint",
    "serialize",
]
