"""Turn images into keypoint proposal files.

Every channel of the chosen layer yields one proposal per image: the peak
of its activation map, or a hidden flag when the channel produced no
output for that image (ReLU sparsity makes this common). Emitted documents
follow the nac-keypoints/1 format consumed by the fitting pipeline; image
width/height record the original image size while point coordinates are
normalized, so they stay resolution-independent.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError
from .maps import (
    ZERO_OUTPUT_THRESHOLD,
    layer_output_with_graph,
    map_from_gradient,
    peak_location,
)
from .models import build_model

logger = logging.getLogger(__name__)

KEYPOINT_FORMAT = "nac-keypoints/1"


@dataclass(frozen=True)
class ExtractionConfig:
    """Settings for one extraction run.

    The channel count of the chosen layer determines the number of
    proposals per image; it is discovered from the first forward pass, not
    configured.
    """

    layer: str
    model: str = "toy:0"
    input_size: int = 64
    batch_size: int = 8
    weights: str | None = None

    def __post_init__(self) -> None:
        if self.input_size < 2:
            raise ConfigError(f"input_size must be >= 2, got {self.input_size}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ImageRecord:
    """One image prepared for the network."""

    image_id: str
    tensor: torch.Tensor
    width: int
    height: int


def load_image(path: str, image_id: str, input_size: int) -> ImageRecord:
    """Read an image file, resize to the network input, scale to [0,1]."""
    with Image.open(path) as handle:
        width, height = handle.size
        resized = handle.convert("RGB").resize(
            (input_size, input_size), Image.BILINEAR
        )
    array = np.asarray(resized, dtype=np.float32) / 255.0
    tensor = torch.from_numpy(array).permute(2, 0, 1)
    return ImageRecord(image_id, tensor, width, height)


def record_from_array(
    array: np.ndarray, image_id: str, input_size: int
) -> ImageRecord:
    """Wrap an (H, W, C) or (H, W) float array in [0,1] as an image record."""
    if array.ndim == 2:
        array = array[:, :, None]
    height, width = array.shape[:2]
    tensor = torch.from_numpy(np.ascontiguousarray(array)).permute(2, 0, 1)
    tensor = torch.nn.functional.interpolate(
        tensor.unsqueeze(0),
        size=(input_size, input_size),
        mode="bilinear",
        align_corners=False,
    )[0]
    return ImageRecord(image_id, tensor, width, height)


def proposals_for_batch(
    model: torch.nn.Module, batch: Sequence[ImageRecord], layer: str, input_size: int
) -> list[dict]:
    """Per-image keypoint entries for one forward pass of the batch.

    Visibility comes from the layer output itself: a channel whose output
    is identically zero for an image marks that proposal hidden and its
    stored location is meaningless (zeros). One backward pass per visible
    (image, channel) pair produces the activation maps.
    """
    stacked = torch.stack([record.tensor for record in batch])
    inputs, output = layer_output_with_graph(model, stacked, layer)
    num_channels = output.shape[1]
    flat_max = output.detach().abs().amax(dim=(2, 3))

    entries = []
    for i, record in enumerate(batch):
        points = [[0.0, 0.0] for _ in range(num_channels)]
        visible = [False] * num_channels
        for channel in range(num_channels):
            if float(flat_max[i, channel]) <= ZERO_OUTPUT_THRESHOLD:
                continue
            (gradient,) = torch.autograd.grad(
                output[i, channel].sum(), inputs, retain_graph=True
            )
            activation = map_from_gradient(gradient[i])
            x, y = peak_location(activation, input_size)
            points[channel] = [float(x), float(y)]
            visible[channel] = True
        entries.append(
            {
                "id": record.image_id,
                "width": record.width,
                "height": record.height,
                "points": points,
                "visible": visible,
            }
        )
    return entries


def extract_keypoints(
    sources: Sequence[tuple[str, object]],
    cfg: ExtractionConfig,
    model: torch.nn.Module | None = None,
) -> tuple[dict, list[dict]]:
    """Extract proposals for (image_id, path-or-array) sources.

    Returns the keypoint document and a list of skipped entries
    ({"id", "path", "error"}) for unreadable images. Raises ConfigError
    when nothing could be read at all (an empty document is unwritable).
    """
    if model is None:
        model = build_model(cfg.model, weights_path=cfg.weights)

    records: list[ImageRecord] = []
    skipped: list[dict] = []
    for image_id, source in sources:
        if isinstance(source, np.ndarray):
            records.append(record_from_array(source, image_id, cfg.input_size))
            continue
        try:
            records.append(load_image(str(source), image_id, cfg.input_size))
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            logger.warning("skipping unreadable image %s: %s", source, exc)
            skipped.append({"id": image_id, "path": str(source), "error": str(exc)})
    if not records:
        raise ConfigError("no readable images")

    entries: list[dict] = []
    for start in range(0, len(records), cfg.batch_size):
        batch = records[start : start + cfg.batch_size]
        entries.extend(
            proposals_for_batch(model, batch, cfg.layer, cfg.input_size)
        )

    document = {
        "format": KEYPOINT_FORMAT,
        "num_proposals": len(entries[0]["points"]),
        "images": entries,
    }
    return document, skipped


def write_document(path: str, document: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(document, indent=2) + "\n")
