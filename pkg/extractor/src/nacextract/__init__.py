"""Keypoint proposal extraction from CNN activation maps."""

from .errors import ConfigError, ExtractError
from .extract import (
    ExtractionConfig,
    ImageRecord,
    extract_keypoints,
    load_image,
    record_from_array,
    write_document,
)
from .maps import activation_map, layer_output_with_graph, peak_location
from .models import ToyCnn, build_model, resolve_layer

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExtractError",
    "ExtractionConfig",
    "ImageRecord",
    "ToyCnn",
    "activation_map",
    "build_model",
    "extract_keypoints",
    "layer_output_with_graph",
    "load_image",
    "peak_location",
    "record_from_array",
    "resolve_layer",
    "write_document",
]
