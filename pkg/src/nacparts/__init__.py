"""Unsupervised part-constellation discovery over keypoint proposals.

Fits a multi-view star model to per-image keypoint proposals by alternating
MAP updates, infers latent roots and views for new images, aggregates part
usage into a final part set, and filters box proposals for augmentation.
"""

from .errors import (
    ConfigError,
    EnumerationLimitError,
    MonotoneDescentError,
    NacError,
    StructuralError,
    ValidationError,
)
from .estimation import (
    FitConfig,
    FitReport,
    fit,
    part_error_table,
    update_roots,
    update_selection,
    update_shifts,
    update_views,
)
from .inference import InferenceResult, infer, infer_batch
from .model import (
    ConstellationModel,
    ImageMeta,
    LatentState,
    ProposalSet,
    active_mask,
    objective,
    residual,
)
from .selection import (
    Box,
    BoxSet,
    best_fitting_parts,
    count_part_usage,
    filter_boxes,
    patch_box,
    top_k_parts,
)
from .synth import (
    SynthResult,
    SynthSpec,
    generate,
    oracle_fit,
    sample_dataset,
    sample_model,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "BoxSet",
    "ConfigError",
    "ConstellationModel",
    "EnumerationLimitError",
    "FitConfig",
    "FitReport",
    "ImageMeta",
    "InferenceResult",
    "LatentState",
    "MonotoneDescentError",
    "NacError",
    "ProposalSet",
    "StructuralError",
    "SynthResult",
    "SynthSpec",
    "ValidationError",
    "active_mask",
    "best_fitting_parts",
    "count_part_usage",
    "filter_boxes",
    "fit",
    "generate",
    "infer",
    "infer_batch",
    "objective",
    "oracle_fit",
    "part_error_table",
    "patch_box",
    "residual",
    "sample_dataset",
    "sample_model",
    "top_k_parts",
    "update_roots",
    "update_selection",
    "update_shifts",
    "update_views",
]
