import numpy as np
import pytest

from nacparts.model import ConstellationModel, ImageMeta, LatentState, ProposalSet


def make_proposals(points, visible=None, image_id="img-0", width=100, height=100):
    points = np.asarray(points, dtype=float)
    if visible is None:
        visible = np.ones(len(points), dtype=bool)
    return ProposalSet(ImageMeta(image_id, width, height), points, visible)


def make_model(num_parts, view_shifts):
    """Build a model from {part: shift} mappings, one per view."""
    num_views = len(view_shifts)
    selected = np.zeros((num_views, num_parts), dtype=bool)
    shifts = np.zeros((num_views, num_parts, 2))
    for v, mapping in enumerate(view_shifts):
        for part, shift in mapping.items():
            selected[v, part] = True
            shifts[v, part] = shift
    return ConstellationModel(selected, shifts)


def make_latent(roots, views):
    return LatentState(np.asarray(roots, dtype=float), np.asarray(views, dtype=int))


def random_instance(seed, num_images=6, num_parts=5, num_views=2, parts_per_view=2):
    """Arbitrary consistent (data, model, latent) triple for property tests."""
    rng = np.random.default_rng(seed)
    data = []
    for i in range(num_images):
        points = rng.uniform(0, 1, size=(num_parts, 2))
        visible = rng.random(num_parts) < 0.8
        data.append(
            make_proposals(points, visible, image_id=f"img-{i}")
        )
    selected = np.zeros((num_views, num_parts), dtype=bool)
    for v in range(num_views):
        selected[v, rng.permutation(num_parts)[:parts_per_view]] = True
    shifts = rng.uniform(-0.2, 0.2, size=(num_views, num_parts, 2))
    model = ConstellationModel(selected, shifts)
    latent = LatentState(
        rng.uniform(0.2, 0.8, size=(num_images, 2)),
        rng.integers(0, num_views, size=num_images),
    )
    return data, model, latent


@pytest.fixture
def single_part_instance():
    """One image, one view selecting part 0 with shift (0.1, 0)."""
    data = [make_proposals([[0.7, 0.5]])]
    model = make_model(1, [{0: (0.1, 0.0)}])
    latent = make_latent([[0.5, 0.5]], [0])
    return data, model, latent
