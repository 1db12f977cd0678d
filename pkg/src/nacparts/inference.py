"""Latent-variable inference for unseen images under a frozen model.

With part selections and shifts fixed, the per-image problem alternates the
view assignment (with jointly re-optimized root) and the root update until
both stop moving. Visibility comes from the proposals themselves and is
never re-estimated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .estimation import _root_step, _view_step
from .model import ConstellationModel, ProposalSet, stack_dataset

ROOT_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class InferenceResult:
    """Estimated root and view plus residuals of the active parts.

    ``part_indices`` lists, in ascending order, the parts that are visible
    and selected by the chosen view; ``residuals`` aligns with it.
    """

    root: np.ndarray
    view: int
    part_indices: np.ndarray
    residuals: np.ndarray

    @property
    def total_error(self) -> float:
        return float(self.residuals.sum())


def infer(
    proposals: ProposalSet,
    model: ConstellationModel,
    max_iters: int = 50,
) -> InferenceResult:
    """Estimate the root point and active view of one image.

    Starts from the image center, then alternates the view and root updates
    with the model frozen until neither changes (root movement below 1e-12)
    or ``max_iters`` is reached. An image with no usable evidence keeps the
    center root and falls to view 0 by the tie rule.
    """
    if proposals.num_parts != model.num_parts:
        raise StructuralError(
            f"image {proposals.meta.image_id!r} has {proposals.num_parts} "
            f"proposals, model expects {model.num_parts}"
        )
    mu, h = stack_dataset([proposals], model.num_parts)
    roots = np.array([[0.5, 0.5]])
    view = -1
    for _ in range(max_iters):
        new_roots, views, _ = _view_step(mu, h, model.selected, model.shifts, roots)
        new_roots = _root_step(mu, h, model.selected, model.shifts, new_roots, views)
        settled = (
            int(views[0]) == view
            and np.abs(new_roots - roots).max() <= ROOT_TOLERANCE
        )
        roots, view = new_roots, int(views[0])
        if settled:
            break

    indices = np.flatnonzero(model.selected[view] & h[0])
    residuals = (
        (mu[0, indices] - roots[0] - model.shifts[view, indices]) ** 2
    ).sum(axis=-1)
    return InferenceResult(
        root=roots[0].copy(),
        view=view,
        part_indices=indices,
        residuals=residuals,
    )


def infer_batch(
    data: list[ProposalSet], model: ConstellationModel, max_iters: int = 50
) -> list[InferenceResult]:
    """Infer every image independently; order matches the input."""
    return [infer(proposals, model, max_iters) for proposals in data]
