"""File format round trips and rejection of invalid documents."""

import json

import numpy as np
import pytest

from nacparts.errors import ValidationError
from nacparts.estimation import FitConfig, fit
from nacparts.fileio import (
    dump_boxes,
    dump_keypoints,
    dump_model,
    dump_report,
    parse_boxes,
    parse_keypoints,
    parse_model,
    parse_report,
)
from nacparts.selection import Box, BoxSet
from nacparts.synth import SynthSpec, generate

from conftest import random_instance


def _valid_keypoint_doc():
    return {
        "format": "nac-keypoints/1",
        "num_proposals": 2,
        "images": [
            {
                "id": "img-7",
                "width": 320,
                "height": 240,
                "points": [[0.25, 0.5], [0.9, 0.125]],
                "visible": [True, False],
            }
        ],
    }


def _valid_model_doc():
    return {
        "format": "nac-model/1",
        "P": 4,
        "V": 2,
        "M": 2,
        "views": [
            {"parts": [0, 2], "shifts": [[0.1, -0.2], [0.0, 0.5]]},
            {"parts": [1, 3], "shifts": [[-0.5, 0.25], [1.0, -1.0]]},
        ],
    }


# --- round trips ------------------------------------------------------------


def test_keypoints_round_trip_is_byte_identical():
    result = generate(
        SynthSpec(
            num_images=5,
            num_parts=4,
            num_views=2,
            parts_per_view=2,
            noise_sigma=0.03,
            visibility_rate=0.8,
            rng_seed=12,
        )
    )
    text = dump_keypoints(result.data)
    assert dump_keypoints(parse_keypoints(text)) == text


def test_keypoints_preserve_hidden_garbage_locations():
    doc = _valid_keypoint_doc()
    doc["images"][0]["points"][1] = [-7.25, 3.5]
    text = json.dumps(doc, indent=2) + "\n"
    data = parse_keypoints(text)
    assert data[0].locations[1].tolist() == [-7.25, 3.5]
    assert dump_keypoints(data) == text


def test_model_round_trip_is_byte_identical():
    text = json.dumps(_valid_model_doc(), indent=2) + "\n"
    assert dump_model(parse_model(text)) == text


def test_boxes_round_trip_is_byte_identical():
    sets = [
        BoxSet("a", (Box(0.0, 0.0, 10.0, 10.0), Box(5.5, 2.25, 60.0, 40.0))),
        BoxSet("b", ()),
    ]
    text = dump_boxes(sets)
    assert dump_boxes(parse_boxes(text)) == text


def test_report_round_trip():
    data, _, _ = random_instance(2, num_images=6, num_parts=5)
    report = fit(data, FitConfig(num_views=2, parts_per_view=2, restarts=2))
    text = dump_report(report, data)
    parsed = parse_report(text)
    assert parsed.objective == report.objective
    assert parsed.best_restart == report.best_restart
    assert parsed.iterations_per_restart == report.iterations_per_restart
    assert parsed.objectives_per_restart == report.objectives_per_restart
    assert np.array_equal(parsed.latent.view_of, report.latent.view_of)
    assert np.array_equal(parsed.latent.roots, report.latent.roots)


# --- rejection of malformed keypoint files ------------------------------------


def test_malformed_json_reports_the_line():
    with pytest.raises(ValidationError, match="line"):
        parse_keypoints('{"format": "nac-keypoints/1",\n  "num_proposals": }')


def test_wrong_format_string_is_rejected():
    doc = _valid_keypoint_doc()
    doc["format"] = "nac-keypoints/2"
    with pytest.raises(ValidationError, match="format"):
        parse_keypoints(json.dumps(doc))


def test_missing_visible_names_the_image():
    doc = _valid_keypoint_doc()
    del doc["images"][0]["visible"]
    with pytest.raises(ValidationError, match="img-7"):
        parse_keypoints(json.dumps(doc))


def test_point_count_mismatch_is_rejected():
    doc = _valid_keypoint_doc()
    doc["images"][0]["points"].append([0.5, 0.5])
    with pytest.raises(ValidationError, match="points"):
        parse_keypoints(json.dumps(doc))


def test_visible_point_out_of_range_is_rejected():
    doc = _valid_keypoint_doc()
    doc["images"][0]["points"][0] = [1.5, 0.5]
    with pytest.raises(ValidationError, match="points"):
        parse_keypoints(json.dumps(doc))


def test_hidden_point_out_of_range_is_accepted():
    doc = _valid_keypoint_doc()
    doc["images"][0]["points"][1] = [55.0, -3.0]
    assert parse_keypoints(json.dumps(doc))[0].locations[1].tolist() == [55.0, -3.0]


def test_non_boolean_visible_is_rejected():
    doc = _valid_keypoint_doc()
    doc["images"][0]["visible"][0] = 1
    with pytest.raises(ValidationError, match="visible"):
        parse_keypoints(json.dumps(doc))


def test_duplicate_image_id_is_rejected():
    doc = _valid_keypoint_doc()
    doc["images"].append(dict(doc["images"][0]))
    with pytest.raises(ValidationError, match="duplicate"):
        parse_keypoints(json.dumps(doc))


def test_degenerate_image_size_is_rejected():
    doc = _valid_keypoint_doc()
    doc["images"][0]["width"] = 0
    with pytest.raises(ValidationError, match="width"):
        parse_keypoints(json.dumps(doc))


# --- rejection of malformed model files ----------------------------------------


def test_model_rejects_descending_parts():
    doc = _valid_model_doc()
    doc["views"][0]["parts"] = [2, 0]
    with pytest.raises(ValidationError, match="ascending"):
        parse_model(json.dumps(doc))


def test_model_rejects_duplicate_parts():
    doc = _valid_model_doc()
    doc["views"][0]["parts"] = [2, 2]
    with pytest.raises(ValidationError, match="ascending"):
        parse_model(json.dumps(doc))


def test_model_rejects_part_index_out_of_range():
    doc = _valid_model_doc()
    doc["views"][0]["parts"] = [0, 9]
    with pytest.raises(ValidationError, match="out of range"):
        parse_model(json.dumps(doc))


def test_model_rejects_wrong_selection_size():
    doc = _valid_model_doc()
    doc["views"][0]["parts"] = [0, 1, 2]
    doc["views"][0]["shifts"] = [[0, 0], [0, 0], [0, 0]]
    with pytest.raises(ValidationError, match="parts"):
        parse_model(json.dumps(doc))


def test_model_rejects_shift_out_of_range():
    doc = _valid_model_doc()
    doc["views"][1]["shifts"][1] = [1.25, 0.0]
    with pytest.raises(ValidationError, match="shifts"):
        parse_model(json.dumps(doc))


def test_model_rejects_m_larger_than_p():
    doc = _valid_model_doc()
    doc["M"] = 9
    with pytest.raises(ValidationError, match="M"):
        parse_model(json.dumps(doc))


def test_model_rejects_view_count_mismatch():
    doc = _valid_model_doc()
    doc["views"].pop()
    with pytest.raises(ValidationError, match="views"):
        parse_model(json.dumps(doc))


# --- rejection of malformed box files ---------------------------------------------


def test_boxes_reject_inverted_rectangle():
    text = json.dumps(
        {
            "format": "nac-boxes/1",
            "images": [{"id": "a", "boxes": [[10, 0, 5, 5]]}],
        }
    )
    with pytest.raises(ValidationError, match="x0 < x1"):
        parse_boxes(text)


def test_boxes_reject_wrong_arity():
    text = json.dumps(
        {
            "format": "nac-boxes/1",
            "images": [{"id": "a", "boxes": [[0, 0, 5]]}],
        }
    )
    with pytest.raises(ValidationError, match="4 entries"):
        parse_boxes(text)
