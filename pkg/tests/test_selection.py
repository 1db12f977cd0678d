"""Part usage aggregation, patch boxes, and box filtering."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nacparts.errors import ConfigError, StructuralError, ValidationError
from nacparts.model import ImageMeta
from nacparts.selection import (
    Box,
    BoxSet,
    best_fitting_parts,
    count_part_usage,
    filter_boxes,
    patch_box,
    top_k_parts,
)

from conftest import make_latent, make_model, make_proposals


# --- count_part_usage ---------------------------------------------------------


def test_usage_counts_everywhere_visible_and_selected():
    model = make_model(1, [{0: (0.0, 0.0)}, {0: (0.1, 0.1)}])
    data = [make_proposals([[0.5, 0.5]], image_id=f"i{n}") for n in range(10)]
    latent = make_latent([[0.5, 0.5]] * 10, [n % 2 for n in range(10)])
    counts = count_part_usage(data, model, latent)
    assert counts.tolist() == [10]


def test_usage_is_zero_for_never_selected_parts():
    model = make_model(2, [{0: (0.0, 0.0)}, {0: (0.1, 0.1)}])
    data = [make_proposals([[0.5, 0.5], [0.5, 0.5]], image_id=f"i{n}") for n in range(4)]
    latent = make_latent([[0.5, 0.5]] * 4, [0, 1, 0, 1])
    counts = count_part_usage(data, model, latent)
    assert counts.tolist() == [4, 0]


def test_usage_counts_only_visible_images_in_the_selecting_view():
    # part 1 selected only by view 0; 6 of 10 images in view 0, visible in 4
    model = make_model(2, [{1: (0.0, 0.0)}, {0: (0.0, 0.0)}])
    views = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1]
    data = []
    for n in range(10):
        visible = [True, n < 4 or n >= 6]
        data.append(
            make_proposals([[0.5, 0.5], [0.5, 0.5]], visible, image_id=f"i{n}")
        )
    latent = make_latent([[0.5, 0.5]] * 10, views)
    counts = count_part_usage(data, model, latent)
    assert counts[1] == 4


# --- top_k_parts ----------------------------------------------------------------


def test_top_k_orders_by_count_then_index():
    assert top_k_parts(np.array([5, 9, 9, 1]), 2) == [1, 2]


def test_top_k_zero_is_empty():
    assert top_k_parts(np.array([3, 1]), 0) == []


def test_top_k_all_equal_uses_index_order():
    assert top_k_parts(np.ones(4, dtype=int), 3) == [0, 1, 2]


def test_top_k_rejects_oversized_k():
    with pytest.raises(ConfigError):
        top_k_parts(np.ones(3, dtype=int), 4)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(0, 12))
def test_top_k_returns_exactly_min_k_p_distinct_indices(seed, k):
    counts = np.random.default_rng(seed).integers(0, 50, size=12)
    picked = top_k_parts(counts, k)
    assert len(picked) == k
    assert len(set(picked)) == len(picked)


# --- patch_box -------------------------------------------------------------------


def test_patch_box_side_from_area_fraction():
    box = patch_box((0.5, 0.5), ImageMeta("a", 500, 400), 1 / 5)
    assert (box.x1 - box.x0, box.y1 - box.y0) == (200, 200)


def test_patch_box_full_image():
    box = patch_box((0.5, 0.5), ImageMeta("a", 224, 224), 1.0)
    assert (box.x0, box.y0, box.x1, box.y1) == (0, 0, 224, 224)


def test_patch_box_translates_back_inside():
    box = patch_box((0.0, 0.0), ImageMeta("a", 100, 100), 1 / 16)
    assert (box.x0, box.y0, box.x1, box.y1) == (0, 0, 25, 25)


def test_patch_box_rejects_nonpositive_fraction():
    with pytest.raises(ConfigError):
        patch_box((0.5, 0.5), ImageMeta("a", 100, 100), 0.0)


@settings(max_examples=60, deadline=None)
@given(
    cx=st.floats(0, 1, allow_nan=False),
    cy=st.floats(0, 1, allow_nan=False),
    width=st.integers(1, 800),
    height=st.integers(1, 800),
    fraction=st.floats(0.001, 2.0, allow_nan=False),
)
def test_patch_box_always_lies_within_the_image(cx, cy, width, height, fraction):
    box = patch_box((cx, cy), ImageMeta("a", width, height), fraction)
    assert 0 <= box.x0 < box.x1 <= width
    assert 0 <= box.y0 < box.y1 <= height


# --- best_fitting_parts ------------------------------------------------------------


def _residual_fixture():
    # active parts 0, 3, 7 with residuals 0.04, 0.0004, 0.01
    root = np.array([0.5, 0.5])
    shifts = {0: (0.25, 0.0), 3: (-0.25, 0.0), 7: (0.0, 0.25)}
    points = np.full((8, 2), 0.5)
    points[0] = root + (0.25, 0.0) + (0.2, 0.0)
    points[3] = root + (-0.25, 0.0) + (0.02, 0.0)
    points[7] = root + (0.0, 0.25) + (0.0, 0.1)
    visible = np.zeros(8, dtype=bool)
    visible[[0, 3, 7]] = True
    data = [make_proposals(points, visible)]
    model = make_model(8, [dict(shifts)])
    latent = make_latent([root], [0])
    return data, model, latent


def test_best_fitting_parts_sorts_by_residual():
    data, model, latent = _residual_fixture()
    assert best_fitting_parts(data, 0, model, latent, count=2) == [3, 7]


def test_best_fitting_parts_empty_without_active_parts():
    model = make_model(2, [{0: (0.1, 0.0)}])
    data = [make_proposals([[0.5, 0.5], [0.5, 0.5]], [False, True])]
    latent = make_latent([[0.5, 0.5]], [0])
    assert best_fitting_parts(data, 0, model, latent) == []


def test_best_fitting_parts_returns_all_when_count_exceeds_active():
    data, model, latent = _residual_fixture()
    assert best_fitting_parts(data, 0, model, latent, count=9) == [3, 7, 0]


# --- filter_boxes --------------------------------------------------------------------


POINTS = [(20.0, 20.0), (80.0, 20.0), (50.0, 50.0), (20.0, 80.0), (80.0, 80.0)]


def test_filter_keeps_box_containing_three_of_five():
    boxes = BoxSet("img", (Box(10, 10, 55, 85),))
    kept = filter_boxes(boxes, POINTS, min_inside=3)
    assert len(kept.boxes) == 1


def test_filter_drops_box_containing_two_of_five():
    boxes = BoxSet("img", (Box(0, 0, 60, 60),))
    kept = filter_boxes(boxes, POINTS, min_inside=3)
    assert kept.boxes == ()


def test_filter_counts_boundary_points_as_inside():
    boxes = BoxSet("img", (Box(20, 20, 80, 80),))
    kept = filter_boxes(boxes, POINTS, min_inside=5)
    assert len(kept.boxes) == 1


def test_filter_rejects_mismatched_image_id():
    boxes = BoxSet("img", (Box(0, 0, 1, 1),))
    with pytest.raises(StructuralError):
        filter_boxes(boxes, POINTS, image_id="other")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), threshold=st.integers(0, 6))
def test_filter_output_is_a_subset_and_idempotent(seed, threshold):
    rng = np.random.default_rng(seed)
    boxes = []
    for _ in range(8):
        x0, y0 = rng.uniform(0, 60, 2)
        w, h = rng.uniform(5, 40, 2)
        boxes.append(Box(x0, y0, x0 + w, y0 + h))
    box_set = BoxSet("img", tuple(boxes))
    points = rng.uniform(0, 100, (5, 2))
    kept = filter_boxes(box_set, points, min_inside=threshold)
    assert set(kept.boxes) <= set(box_set.boxes)
    again = filter_boxes(kept, points, min_inside=threshold)
    assert again.boxes == kept.boxes


def test_box_rejects_inverted_corners():
    with pytest.raises(ValidationError):
        Box(10, 10, 5, 20)
