"""Alternating MAP estimation of the constellation model.

One fit iteration performs four coordinate updates, each the exact minimizer
of the objective in its own block of variables: shift vectors first (which
also serves as their initialization), then root points, then part selection
per view, then view assignment with jointly re-optimized roots. A restart
stops once the state is fully stable: part selection and view assignment
unchanged and shift/root movement below 1e-13, so the continuous subproblem
of the final discrete assignment is solved to convergence. Random restarts
keep the best objective.

Every update is non-increasing in the objective. The fit loop verifies this
after each step and raises MonotoneDescentError on violation; the one benign
exception is the [-1,1] clamp on shift vectors, which is logged instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, MonotoneDescentError
from .model import (
    ConstellationModel,
    LatentState,
    ProposalSet,
    check_consistent,
    objective,
    objective_arrays,
    stack_dataset,
)

logger = logging.getLogger(__name__)

DESCENT_TOLERANCE = 1e-12
MOVEMENT_TOLERANCE = 1e-13


@dataclass(frozen=True)
class FitConfig:
    """Settings for one model fit."""

    num_views: int = 5
    parts_per_view: int = 10
    restarts: int = 5
    max_iters: int = 100
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_views < 1:
            raise ConfigError(f"num_views must be >= 1, got {self.num_views}")
        if self.parts_per_view < 1:
            raise ConfigError(
                f"parts_per_view must be >= 1, got {self.parts_per_view}"
            )
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True, eq=False)
class FitReport:
    """Result of a fit: best model and latents plus the restart trace.

    ``objective`` always equals ``model.objective(data, model, latent)``
    recomputed from scratch on the returned values.
    """

    model: ConstellationModel
    latent: LatentState
    objective: float
    iterations_per_restart: tuple[int, ...]
    objectives_per_restart: tuple[float, ...]
    best_restart: int


def _assignment_onehot(view_of: np.ndarray, num_views: int) -> np.ndarray:
    onehot = np.zeros((view_of.shape[0], num_views), dtype=bool)
    onehot[np.arange(view_of.shape[0]), view_of] = True
    return onehot


def _shift_step(
    mu: np.ndarray,
    h: np.ndarray,
    selected: np.ndarray,
    shifts: np.ndarray,
    roots: np.ndarray,
    view_of: np.ndarray,
) -> tuple[np.ndarray, bool]:
    """Mean offset (location - root) per supported (view, part), clamped.

    Pairs with no supporting image keep their previous shift. Returns the new
    shifts and whether the clamp changed any supported entry.
    """
    onehot = _assignment_onehot(view_of, selected.shape[0])
    support = onehot[:, :, None] & selected[None, :, :] & h[:, None, :]
    counts = support.sum(axis=0)
    offsets = mu - roots[:, None, :]
    sums = np.einsum("ivp,ipc->vpc", support.astype(np.float64), offsets)
    with np.errstate(invalid="ignore"):
        means = sums / counts[..., None]
    supported = counts > 0
    updated = np.where(supported[..., None], means, shifts)
    clamped = np.clip(updated, -1.0, 1.0)
    clamp_hit = bool((clamped != updated).any())
    return clamped, clamp_hit


def _root_step(
    mu: np.ndarray,
    h: np.ndarray,
    selected: np.ndarray,
    shifts: np.ndarray,
    roots: np.ndarray,
    view_of: np.ndarray,
) -> np.ndarray:
    """Mean of (location - shift) over each image's visible selected parts."""
    active = selected[view_of] & h
    counts = active.sum(axis=1)
    diffs = mu - shifts[view_of]
    sums = np.where(active[..., None], diffs, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore"):
        means = sums / counts[:, None]
    return np.where((counts > 0)[:, None], means, roots)


def _error_table(
    mu: np.ndarray,
    h: np.ndarray,
    shifts: np.ndarray,
    roots: np.ndarray,
    view_of: np.ndarray,
    num_views: int,
) -> np.ndarray:
    """E[v, p]: summed squared residual of part p over images assigned to v."""
    sq = (
        (mu[:, None, :, :] - roots[:, None, None, :] - shifts[None, :, :, :]) ** 2
    ).sum(axis=-1)
    weights = _assignment_onehot(view_of, num_views)[:, :, None] & h[:, None, :]
    return np.where(weights, sq, 0.0).sum(axis=0)


def _select_step(errors: np.ndarray, parts_per_view: int) -> np.ndarray:
    """Per view, mark the parts with the smallest error; ties go to low index."""
    selected = np.zeros(errors.shape, dtype=bool)
    for view in range(errors.shape[0]):
        order = np.argsort(errors[view], kind="stable")
        selected[view, order[:parts_per_view]] = True
    return selected


def _view_step(
    mu: np.ndarray,
    h: np.ndarray,
    selected: np.ndarray,
    shifts: np.ndarray,
    roots: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jointly pick the best view and its optimal root for every image.

    For each candidate view the root is re-estimated from that view's visible
    selected parts (falling back to the current root when there are none, in
    which case the view's error is an empty sum, i.e. zero). Ties go to the
    lower view index. Returns (roots, views, per-image-per-view errors).
    """
    n = mu.shape[0]
    active = selected[None, :, :] & h[:, None, :]
    counts = active.sum(axis=-1)
    diffs = mu[:, None, :, :] - shifts[None, :, :, :]
    sums = np.where(active[..., None], diffs, 0.0).sum(axis=2)
    with np.errstate(invalid="ignore"):
        candidates = sums / counts[..., None]
    candidates = np.where((counts > 0)[..., None], candidates, roots[:, None, :])
    sq = ((diffs - candidates[:, :, None, :]) ** 2).sum(axis=-1)
    errors = np.where(active, sq, 0.0).sum(axis=-1)
    views = errors.argmin(axis=1)
    return candidates[np.arange(n), views], views, errors


def update_shifts(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> ConstellationModel:
    """Recompute shift vectors as mean offsets; unsupported pairs keep theirs."""
    check_consistent(data, model, latent)
    mu, h = stack_dataset(data, model.num_parts)
    shifts, _ = _shift_step(
        mu, h, model.selected, model.shifts, latent.roots, latent.view_of
    )
    return ConstellationModel(model.selected, shifts)


def update_roots(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> LatentState:
    """Recompute root points; images with no active part keep theirs."""
    check_consistent(data, model, latent)
    mu, h = stack_dataset(data, model.num_parts)
    roots = _root_step(
        mu, h, model.selected, model.shifts, latent.roots, latent.view_of
    )
    return LatentState(roots, latent.view_of)


def part_error_table(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> np.ndarray:
    """(V, P) matrix of summed squared residuals used to rank parts per view.

    Row v aggregates over the images currently assigned to view v and counts
    every visible part, selected or not, so the ranking can swap parts in.
    """
    check_consistent(data, model, latent)
    mu, h = stack_dataset(data, model.num_parts)
    return _error_table(
        mu, h, model.shifts, latent.roots, latent.view_of, model.num_views
    )


def update_selection(errors: np.ndarray, parts_per_view: int) -> np.ndarray:
    """Pick the ``parts_per_view`` lowest-error parts per view, ties by index."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.ndim != 2:
        raise ConfigError(f"error table must be (V, P), got shape {errors.shape}")
    if not 1 <= parts_per_view <= errors.shape[1]:
        raise ConfigError(
            f"parts_per_view {parts_per_view} out of range for {errors.shape[1]} parts"
        )
    return _select_step(errors, parts_per_view)


def update_views(
    data: Sequence[ProposalSet], model: ConstellationModel, latent: LatentState
) -> LatentState:
    """Reassign each image to its best view, re-optimizing the root jointly."""
    check_consistent(data, model, latent)
    mu, h = stack_dataset(data, model.num_parts)
    roots, views, _ = _view_step(
        mu, h, model.selected, model.shifts, latent.roots
    )
    return LatentState(roots, views)


def _checked(
    previous: float, current: float, step: str, clamp_hit: bool = False
) -> float:
    if current > previous + DESCENT_TOLERANCE:
        if clamp_hit:
            logger.warning(
                "shift clamp raised the objective by %.3e during %s",
                current - previous,
                step,
            )
            return current
        raise MonotoneDescentError(
            f"{step} raised the objective from {previous!r} to {current!r}"
        )
    return current


@dataclass(frozen=True)
class _RestartResult:
    selected: np.ndarray
    shifts: np.ndarray
    roots: np.ndarray
    view_of: np.ndarray
    objective: float
    iterations: int


def _fit_once(
    mu: np.ndarray, h: np.ndarray, cfg: FitConfig, rng: np.random.Generator
) -> _RestartResult:
    n, num_parts, _ = mu.shape
    num_views, m = cfg.num_views, cfg.parts_per_view

    selected = np.zeros((num_views, num_parts), dtype=bool)
    for view in range(num_views):
        selected[view, rng.permutation(num_parts)[:m]] = True
    view_of = rng.integers(0, num_views, size=n)
    roots = np.full((n, 2), 0.5)
    shifts = np.zeros((num_views, num_parts, 2))

    obj = objective_arrays(mu, h, selected, shifts, roots, view_of)
    iterations = 0
    for _ in range(cfg.max_iters):
        iterations += 1
        previous = (selected, view_of, shifts, roots)
        shifts, clamp_hit = _shift_step(mu, h, selected, shifts, roots, view_of)
        obj = _checked(
            obj,
            objective_arrays(mu, h, selected, shifts, roots, view_of),
            "shift update",
            clamp_hit,
        )
        roots = _root_step(mu, h, selected, shifts, roots, view_of)
        obj = _checked(
            obj,
            objective_arrays(mu, h, selected, shifts, roots, view_of),
            "root update",
        )
        errors = _error_table(mu, h, shifts, roots, view_of, num_views)
        selected = _select_step(errors, m)
        obj = _checked(
            obj,
            objective_arrays(mu, h, selected, shifts, roots, view_of),
            "selection update",
        )
        roots, view_of, _ = _view_step(mu, h, selected, shifts, roots)
        obj = _checked(
            obj,
            objective_arrays(mu, h, selected, shifts, roots, view_of),
            "view update",
        )
        # Stable selection is necessary but not sufficient: the continuous
        # block must also have settled, or the returned objective would sit
        # above the optimum of the final discrete assignment.
        settled = (
            (selected == previous[0]).all()
            and (view_of == previous[1]).all()
            and np.abs(shifts - previous[2]).max(initial=0.0) < MOVEMENT_TOLERANCE
            and np.abs(roots - previous[3]).max(initial=0.0) < MOVEMENT_TOLERANCE
        )
        if settled:
            break

    return _RestartResult(selected, shifts, roots, view_of, obj, iterations)


def fit(data: Sequence[ProposalSet], cfg: FitConfig | None = None) -> FitReport:
    """Fit a constellation model by alternating updates with random restarts.

    Each restart initializes roots at the image center, views uniformly at
    random and part selections as uniform random subsets; shifts need no
    initialization because they are recomputed first. Restarts use
    independent streams spawned from ``cfg.rng_seed``, so the result is a
    pure function of (data, cfg). The restart with the smallest objective
    wins; ties go to the earliest restart.
    """
    if cfg is None:
        cfg = FitConfig()
    if not data:
        raise ConfigError("cannot fit an empty dataset")
    num_parts = data[0].num_parts
    if cfg.parts_per_view > num_parts:
        raise ConfigError(
            f"parts_per_view {cfg.parts_per_view} exceeds the "
            f"{num_parts} available proposals"
        )
    mu, h = stack_dataset(data, num_parts)

    streams = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.restarts)
    results = [
        _fit_once(mu, h, cfg, np.random.default_rng(stream)) for stream in streams
    ]

    objectives = [result.objective for result in results]
    best_index = int(np.argmin(objectives))
    best = results[best_index]

    best_model = ConstellationModel(best.selected, best.shifts)
    best_latent = LatentState(best.roots, best.view_of)
    return FitReport(
        model=best_model,
        latent=best_latent,
        objective=objective(data, best_model, best_latent),
        iterations_per_restart=tuple(result.iterations for result in results),
        objectives_per_restart=tuple(objectives),
        best_restart=best_index,
    )
