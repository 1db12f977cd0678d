"""Post-fit utilities: final part sets, patch boxes, and box filtering.

These operate on a fitted model plus latents. Part usage counting and top-K
aggregation produce the final classification part set; patch boxes turn part
locations into fixed-area square crops; box filtering keeps augmentation
proposals that contain enough of an image's best-fitting parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, StructuralError, ValidationError
from .model import (
    ConstellationModel,
    ImageMeta,
    LatentState,
    ProposalSet,
    active_mask,
    check_consistent,
)


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in pixel coordinates, x0 < x1 and y0 < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        for value in (self.x0, self.y0, self.x1, self.y1):
            if not math.isfinite(value):
                raise ValidationError("box coordinates must be finite")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValidationError(
                f"box must satisfy x0 < x1 and y0 < y1, got "
                f"({self.x0}, {self.y0}, {self.x1}, {self.y1})"
            )

    def contains(self, x: float, y: float) -> bool:
        """Boundary-inclusive point containment."""
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True, eq=False)
class BoxSet:
    """All candidate boxes of one image."""

    image_id: str
    boxes: tuple[Box, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))


def count_part_usage(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> np.ndarray:
    """Per part, the number of images in which it is used.

    A part counts for an image when it is visible there and selected by the
    image's assigned view.
    """
    return active_mask(data, model, latent).sum(axis=0).astype(np.int64)


def top_k_parts(counts: np.ndarray, k: int) -> list[int]:
    """The k most-used part indices, by descending count, ties to low index."""
    counts = np.asarray(counts)
    if not 0 <= k <= counts.shape[0]:
        raise ConfigError(f"k {k} out of range for {counts.shape[0]} parts")
    order = np.lexsort((np.arange(counts.shape[0]), -counts))
    return [int(p) for p in order[:k]]


def patch_box(
    center: Sequence[float], meta: ImageMeta, area_fraction: float
) -> Box:
    """Square crop of area ``area_fraction * W * H`` around a normalized point.

    The side is rounded to whole pixels and capped at min(W, H); a box that
    would stick out is translated back inside rather than shrunk, preserving
    the prescribed area.
    """
    if area_fraction <= 0:
        raise ConfigError(f"area_fraction must be positive, got {area_fraction}")
    side = math.floor(math.sqrt(area_fraction * meta.width * meta.height) + 0.5)
    side = max(1, min(side, min(meta.width, meta.height)))
    x0 = center[0] * meta.width - side / 2
    y0 = center[1] * meta.height - side / 2
    x0 = min(max(x0, 0.0), meta.width - side)
    y0 = min(max(y0, 0.0), meta.height - side)
    return Box(x0, y0, x0 + side, y0 + side)


def best_fitting_parts(
    data: Sequence[ProposalSet],
    image_index: int,
    model: ConstellationModel,
    latent: LatentState,
    count: int = 5,
) -> list[int]:
    """The image's active parts with the smallest residuals, ties to low index.

    Returns fewer than ``count`` indices when the image has fewer active
    parts (visible and selected by its assigned view).
    """
    check_consistent(data, model, latent)
    proposals = data[image_index]
    view = int(latent.view_of[image_index])
    indices = np.flatnonzero(model.selected[view] & proposals.visible)
    if indices.size == 0:
        return []
    diffs = (
        proposals.locations[indices]
        - latent.roots[image_index]
        - model.shifts[view, indices]
    )
    residuals = (diffs**2).sum(axis=-1)
    order = np.lexsort((indices, residuals))
    return [int(p) for p in indices[order][:count]]


def filter_boxes(
    boxes: BoxSet,
    part_points: Sequence[Sequence[float]],
    min_inside: int = 3,
    image_id: str | None = None,
) -> BoxSet:
    """Keep the boxes containing at least ``min_inside`` of the given points.

    ``part_points`` must already be in pixel coordinates for the same image;
    containment is boundary-inclusive. Passing ``image_id`` asserts that the
    points belong to the box set's image.
    """
    if image_id is not None and image_id != boxes.image_id:
        raise StructuralError(
            f"part points are for image {image_id!r}, boxes are for "
            f"{boxes.image_id!r}"
        )
    points = np.asarray(part_points, dtype=np.float64).reshape(-1, 2)
    kept = []
    for box in boxes.boxes:
        inside = (
            (points[:, 0] >= box.x0)
            & (points[:, 0] <= box.x1)
            & (points[:, 1] >= box.y0)
            & (points[:, 1] <= box.y1)
        )
        if int(inside.sum()) >= min_inside:
            kept.append(box)
    return BoxSet(boxes.image_id, tuple(kept))
