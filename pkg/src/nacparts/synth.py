"""Synthetic ground-truth data and an exhaustive verification solver.

The generator samples a known constellation model and draws images from its
generative story: selected parts scatter normally around root + shift,
unselected parts fall uniformly on the unit square, and visibility is an
independent coin flip. The brute-force solver enumerates every feasible
(part selection, view assignment) pair and solves the remaining convex
quadratic exactly, providing a global optimum to test the fitter against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .errors import ConfigError, EnumerationLimitError
from .model import (
    ConstellationModel,
    ImageMeta,
    LatentState,
    ProposalSet,
    stack_dataset,
)

ROOT_RANGE = (0.3, 0.7)
SHIFT_RANGE = 0.25
ENUMERATION_LIMIT = 10**6
ALTERNATION_TOLERANCE = 1e-13
ALTERNATION_MAX_ITERS = 1000

Assignment = tuple[tuple[tuple[int, ...], ...], tuple[int, ...]]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic dataset draw."""

    num_images: int
    num_parts: int
    num_views: int
    parts_per_view: int
    noise_sigma: float = 0.0
    visibility_rate: float = 1.0
    background: str = "uniform"
    rng_seed: int = 0
    width: int = 224
    height: int = 224

    def __post_init__(self) -> None:
        if self.num_images < 1 or self.num_views < 1:
            raise ConfigError("num_images and num_views must be >= 1")
        if not 1 <= self.parts_per_view <= self.num_parts:
            raise ConfigError(
                f"parts_per_view {self.parts_per_view} out of range for "
                f"{self.num_parts} parts"
            )
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.visibility_rate <= 1.0:
            raise ConfigError(
                f"visibility_rate must lie in [0,1], got {self.visibility_rate}"
            )
        if self.background != "uniform":
            raise ConfigError(f"unknown background rule {self.background!r}")


@dataclass(frozen=True, eq=False)
class SynthResult:
    """A sampled dataset together with its generating model and latents.

    ``clipped`` marks (image, part) entries where a generated true-part
    location had to be clipped to the unit square; recovery tests may use it
    to exclude pathological draws.
    """

    data: list[ProposalSet]
    model: ConstellationModel
    latent: LatentState
    clipped: np.ndarray


def sample_model(
    num_parts: int, num_views: int, parts_per_view: int, rng: np.random.Generator
) -> ConstellationModel:
    """Random ground-truth model: uniform part subsets and bounded shifts."""
    selected = np.zeros((num_views, num_parts), dtype=bool)
    for view in range(num_views):
        selected[view, rng.permutation(num_parts)[:parts_per_view]] = True
    shifts = rng.uniform(-SHIFT_RANGE, SHIFT_RANGE, size=(num_views, num_parts, 2))
    return ConstellationModel(selected, shifts)


def sample_dataset(
    model: ConstellationModel,
    num_images: int,
    noise_sigma: float,
    visibility_rate: float,
    rng: np.random.Generator,
    width: int = 224,
    height: int = 224,
    id_prefix: str = "synth",
) -> tuple[list[ProposalSet], LatentState, np.ndarray]:
    """Draw images from a fixed model; returns (data, latents, clipped mask).

    Roots are sampled away from the borders so that true parts rarely need
    clipping; the returned mask records where clipping happened anyway.
    """
    n, p = num_images, model.num_parts
    views = rng.integers(0, model.num_views, size=n)
    roots = rng.uniform(ROOT_RANGE[0], ROOT_RANGE[1], size=(n, 2))
    noise = rng.normal(0.0, noise_sigma, size=(n, p, 2))
    background = rng.uniform(0.0, 1.0, size=(n, p, 2))
    visible = rng.random((n, p)) < visibility_rate

    on_model = model.selected[views]
    ideal = roots[:, None, :] + model.shifts[views] + noise
    locations = np.where(on_model[..., None], ideal, background)
    clipped = on_model & ((ideal < 0.0) | (ideal > 1.0)).any(axis=-1)
    locations = np.clip(locations, 0.0, 1.0)

    data = [
        ProposalSet(
            ImageMeta(f"{id_prefix}-{i:04d}", width, height),
            locations[i],
            visible[i],
        )
        for i in range(n)
    ]
    return data, LatentState(roots, views), clipped


def generate(spec: SynthSpec) -> SynthResult:
    """Sample a model and a dataset drawn from it, deterministically by seed."""
    rng = np.random.default_rng(spec.rng_seed)
    model = sample_model(spec.num_parts, spec.num_views, spec.parts_per_view, rng)
    data, latent, clipped = sample_dataset(
        model,
        spec.num_images,
        spec.noise_sigma,
        spec.visibility_rate,
        rng,
        width=spec.width,
        height=spec.height,
    )
    return SynthResult(data=data, model=model, latent=latent, clipped=clipped)


def _solve_assignments(
    mu: np.ndarray,
    h: np.ndarray,
    selected: np.ndarray,
    views_batch: np.ndarray,
    trace: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Exact objectives for a batch of view assignments under one selection.

    With the discrete variables fixed, the objective is a jointly convex
    quadratic in (roots, shifts); alternating their closed-form updates until
    movement falls below 1e-13 reaches its global minimum. ``views_batch``
    is (K, N); returns (K,) objectives. When ``trace`` is given, the
    objective of every configuration is appended after each full pass.
    """
    k, n = views_batch.shape
    num_views, num_parts = selected.shape

    active = selected[views_batch] & h[None, :, :]
    onehot = np.zeros((k, n, num_views), dtype=bool)
    onehot[np.arange(k)[:, None], np.arange(n)[None, :], views_batch] = True
    support = onehot[:, :, :, None] & selected[None, None, :, :]
    support &= h[None, :, None, :]
    part_counts = support.sum(axis=1)
    image_counts = active.sum(axis=-1)
    support_f = support.astype(np.float64)

    roots = np.full((k, n, 2), 0.5)
    shifts = np.zeros((k, num_views, num_parts, 2))

    def current_objectives() -> np.ndarray:
        gathered = shifts[np.arange(k)[:, None], views_batch]
        sq = ((mu[None] - roots[:, :, None, :] - gathered) ** 2).sum(axis=-1)
        return np.where(active, sq, 0.0).sum(axis=(1, 2))

    for _ in range(ALTERNATION_MAX_ITERS):
        offsets = mu[None] - roots[:, :, None, :]
        sums = np.einsum("kivp,kipc->kvpc", support_f, offsets)
        with np.errstate(invalid="ignore"):
            means = sums / part_counts[..., None]
        new_shifts = np.where((part_counts > 0)[..., None], means, shifts)

        gathered = new_shifts[np.arange(k)[:, None], views_batch]
        diffs = np.where(active[..., None], mu[None] - gathered, 0.0)
        with np.errstate(invalid="ignore"):
            root_means = diffs.sum(axis=2) / image_counts[..., None]
        new_roots = np.where((image_counts > 0)[..., None], root_means, roots)

        movement = max(
            float(np.abs(new_shifts - shifts).max(initial=0.0)),
            float(np.abs(new_roots - roots).max(initial=0.0)),
        )
        shifts, roots = new_shifts, new_roots
        if trace is not None:
            trace.append(current_objectives())
        if movement < ALTERNATION_TOLERANCE:
            break

    return current_objectives()


def oracle_fit(
    data: Sequence[ProposalSet],
    num_views: int,
    parts_per_view: int,
    max_configurations: int = ENUMERATION_LIMIT,
    chunk_size: int = 4096,
) -> tuple[float, list[Assignment]]:
    """Global minimum of the objective by exhaustive enumeration.

    Enumerates every feasible part selection and view assignment in
    lexicographic order, solves each remaining convex quadratic exactly, and
    returns the best objective with every assignment attaining it within
    1e-12. Refuses instances whose configuration count exceeds
    ``max_configurations``.
    """
    if not data:
        raise ConfigError("cannot solve an empty dataset")
    if num_views < 1:
        raise ConfigError(f"num_views must be >= 1, got {num_views}")
    num_parts = data[0].num_parts
    if not 1 <= parts_per_view <= num_parts:
        raise ConfigError(
            f"parts_per_view {parts_per_view} out of range for {num_parts} parts"
        )
    n = len(data)
    total = math.comb(num_parts, parts_per_view) ** num_views * num_views**n
    if total > max_configurations:
        raise EnumerationLimitError(
            f"{total} configurations exceed the enumeration bound "
            f"{max_configurations}"
        )
    mu, h = stack_dataset(data, num_parts)

    best = math.inf
    winners: list[tuple[float, Assignment]] = []
    subsets = list(combinations(range(num_parts), parts_per_view))
    assignment_count = num_views**n

    for chosen in product(subsets, repeat=num_views):
        selected = np.zeros((num_views, num_parts), dtype=bool)
        for view, parts in enumerate(chosen):
            selected[view, list(parts)] = True
        for start in range(0, assignment_count, chunk_size):
            stop = min(start + chunk_size, assignment_count)
            flat = np.arange(start, stop)
            views_batch = np.stack(
                np.unravel_index(flat, (num_views,) * n), axis=1
            )
            objectives = _solve_assignments(mu, h, selected, views_batch)
            chunk_best = float(objectives.min())
            if chunk_best < best:
                best = chunk_best
                winners = [
                    (value, assignment)
                    for value, assignment in winners
                    if value <= best + 1e-12
                ]
            near = np.flatnonzero(objectives <= best + 1e-12)
            for index in near:
                winners.append(
                    (
                        float(objectives[index]),
                        (chosen, tuple(int(v) for v in views_batch[index])),
                    )
                )

    return best, [assignment for _, assignment in winners]
