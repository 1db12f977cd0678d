"""Core domain types and the squared-error objective of the star model.

A constellation model holds V alternative views. Each view selects M of the
P part detectors and assigns every selected part a shift vector. An image is
explained by one active view and a latent root point: each visible selected
part should sit at root + shift, and the objective sums the squared residuals
of that explanation over a dataset.

Keypoint locations are normalized to [0,1]^2. Root points are deliberately
not clamped because the closed-form optimum may fall slightly outside the
unit square; shift vectors are kept inside [-1,1]^2 by the estimation step.
Locations of hidden parts are preserved verbatim but carry no meaning, and
every computation masks them out before arithmetic can see them.

All types are immutable after construction, so shared instances are safe to
read from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import StructuralError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ImageMeta:
    """Identity and pixel dimensions of one image."""

    image_id: str
    width: int
    height: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if self.width < 1 or self.height < 1:
            raise StructuralError(
                f"image {self.image_id!r}: width and height must be >= 1, "
                f"got {self.width}x{self.height}"
            )


@dataclass(frozen=True, eq=False)
class ProposalSet:
    """Per-image part proposals: one location and visibility flag per channel.

    ``locations`` has shape (P, 2) with normalized coordinates; ``visible``
    has shape (P,). Hidden entries of ``locations`` are stored untouched and
    are never range-checked: they carry no meaning.
    """

    meta: ImageMeta
    locations: np.ndarray
    visible: np.ndarray

    def __post_init__(self) -> None:
        locations = np.array(self.locations, dtype=np.float64)
        visible = np.array(self.visible, dtype=bool)
        if locations.ndim != 2 or locations.shape[1] != 2:
            raise StructuralError(
                f"image {self.meta.image_id!r}: locations must be (P, 2), "
                f"got shape {locations.shape}"
            )
        if visible.shape != (locations.shape[0],):
            raise StructuralError(
                f"image {self.meta.image_id!r}: visible has length "
                f"{visible.shape[0] if visible.ndim == 1 else visible.shape}, "
                f"expected {locations.shape[0]}"
            )
        shown = locations[visible]
        if shown.size and (
            not np.isfinite(shown).all() or shown.min() < 0.0 or shown.max() > 1.0
        ):
            raise StructuralError(
                f"image {self.meta.image_id!r}: visible locations must lie in [0,1]^2"
            )
        object.__setattr__(self, "locations", _frozen(locations))
        object.__setattr__(self, "visible", _frozen(visible))

    @property
    def num_parts(self) -> int:
        return self.locations.shape[0]


@dataclass(frozen=True, eq=False)
class ConstellationModel:
    """Star model: per-view part selections and shift vectors.

    ``selected`` is a (V, P) boolean matrix with exactly M true entries per
    row. ``shifts`` is (V, P, 2); entries of unselected parts are retained
    (they keep whatever value the last supported update gave them) but are
    ignored by the objective.
    """

    selected: np.ndarray
    shifts: np.ndarray

    def __post_init__(self) -> None:
        selected = np.array(self.selected, dtype=bool)
        shifts = np.array(self.shifts, dtype=np.float64)
        if selected.ndim != 2 or selected.shape[0] < 1:
            raise StructuralError(
                f"selected must be a (V, P) matrix with V >= 1, got shape {selected.shape}"
            )
        if shifts.shape != selected.shape + (2,):
            raise StructuralError(
                f"shifts shape {shifts.shape} does not match selections {selected.shape}"
            )
        counts = selected.sum(axis=1)
        if counts.min() < 1 or (counts != counts[0]).any():
            raise StructuralError(
                f"every view must select the same nonzero number of parts, got {counts.tolist()}"
            )
        if not np.isfinite(shifts).all() or np.abs(shifts).max(initial=0.0) > 1.0:
            raise StructuralError("shift components must lie in [-1,1]")
        object.__setattr__(self, "selected", _frozen(selected))
        object.__setattr__(self, "shifts", _frozen(shifts))

    @property
    def num_views(self) -> int:
        return self.selected.shape[0]

    @property
    def num_parts(self) -> int:
        return self.selected.shape[1]

    @property
    def parts_per_view(self) -> int:
        return int(self.selected[0].sum())

    def view_parts(self, view: int) -> list[int]:
        """Ascending indices of the parts selected by one view."""
        return [int(p) for p in np.flatnonzero(self.selected[view])]


@dataclass(frozen=True, eq=False)
class LatentState:
    """Per-image latent variables: root point and active view index."""

    roots: np.ndarray
    view_of: np.ndarray

    def __post_init__(self) -> None:
        roots = np.array(self.roots, dtype=np.float64)
        view_of = np.array(self.view_of, dtype=np.int64)
        if roots.ndim != 2 or roots.shape[1] != 2:
            raise StructuralError(f"roots must be (N, 2), got shape {roots.shape}")
        if view_of.shape != (roots.shape[0],):
            raise StructuralError(
                f"view_of length {view_of.shape} does not match {roots.shape[0]} roots"
            )
        if not np.isfinite(roots).all():
            raise StructuralError("roots must be finite")
        if view_of.size and view_of.min() < 0:
            raise StructuralError("view indices must be nonnegative")
        object.__setattr__(self, "roots", _frozen(roots))
        object.__setattr__(self, "view_of", _frozen(view_of))

    @property
    def num_images(self) -> int:
        return self.roots.shape[0]


def stack_dataset(
    data: Sequence[ProposalSet], num_parts: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stack a dataset into (N, P, 2) locations and an (N, P) visibility mask.

    Hidden slots are zero-filled so that stray values (including NaN) in the
    stored hidden locations can never leak into arithmetic.
    """
    n = len(data)
    mu = np.zeros((n, num_parts, 2))
    h = np.zeros((n, num_parts), dtype=bool)
    for i, proposals in enumerate(data):
        if proposals.num_parts != num_parts:
            raise StructuralError(
                f"image {proposals.meta.image_id!r} has {proposals.num_parts} "
                f"proposals, expected {num_parts}"
            )
        h[i] = proposals.visible
        mu[i][proposals.visible] = proposals.locations[proposals.visible]
    return mu, h


def check_consistent(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> None:
    """Raise StructuralError unless data, model and latents agree in size."""
    if latent.num_images != len(data):
        raise StructuralError(
            f"latent state covers {latent.num_images} images, dataset has {len(data)}"
        )
    if latent.view_of.size and latent.view_of.max() >= model.num_views:
        raise StructuralError(
            f"view index {int(latent.view_of.max())} out of range for "
            f"{model.num_views} views"
        )
    for proposals in data:
        if proposals.num_parts != model.num_parts:
            raise StructuralError(
                f"image {proposals.meta.image_id!r} has {proposals.num_parts} "
                f"proposals, model expects {model.num_parts}"
            )


def objective_arrays(
    mu: np.ndarray,
    h: np.ndarray,
    selected: np.ndarray,
    shifts: np.ndarray,
    roots: np.ndarray,
    view_of: np.ndarray,
) -> float:
    """Objective on pre-stacked arrays; summation order is fixed."""
    active = selected[view_of] & h
    sq = ((mu - roots[:, None, :] - shifts[view_of]) ** 2).sum(axis=-1)
    return float(np.where(active, sq, 0.0).sum())


def objective(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> float:
    """Total squared residual of visible selected parts under assigned views.

    Sums ``||mu_ip - a_i - d_vp||^2`` over every image i and part p that is
    visible in i and selected by i's assigned view v. Deterministic and
    nonnegative.
    """
    check_consistent(data, model, latent)
    if not data:
        return 0.0
    mu, h = stack_dataset(data, model.num_parts)
    return objective_arrays(
        mu, h, model.selected, model.shifts, latent.roots, latent.view_of
    )


def residual(
    data: Sequence[ProposalSet],
    image_index: int,
    part: int,
    model: ConstellationModel,
    latent: LatentState,
) -> float:
    """Squared residual of one visible part under the image's assigned view.

    Raises ValueError if the part is hidden in that image; hidden locations
    carry no meaning.
    """
    check_consistent(data, model, latent)
    proposals = data[image_index]
    if not proposals.visible[part]:
        raise ValueError(
            f"part {part} is hidden in image {proposals.meta.image_id!r}"
        )
    view = int(latent.view_of[image_index])
    diff = (
        proposals.locations[part]
        - latent.roots[image_index]
        - model.shifts[view, part]
    )
    return float(diff @ diff)


def active_mask(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> np.ndarray:
    """(N, P) boolean matrix: part p is selected by image i's view and visible.

    Entry (i, p) equals the triple product s_iv * b_vp * h_ip for v = the
    assigned view of image i.
    """
    check_consistent(data, model, latent)
    _, h = stack_dataset(data, model.num_parts)
    return model.selected[latent.view_of] & h
