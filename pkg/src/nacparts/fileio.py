"""JSON file formats: keypoints, models, boxes, and fit reports.

Every document carries a ``format`` version string. Serialization is
canonical (fixed key order, two-space indent, shortest float repr), so
parse followed by serialize reproduces a canonical file byte for byte.
Validation errors name the offending JSON path and image id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ValidationError
from .estimation import FitReport
from .model import ConstellationModel, ImageMeta, LatentState, ProposalSet
from .selection import Box, BoxSet

KEYPOINT_FORMAT = "nac-keypoints/1"
MODEL_FORMAT = "nac-model/1"
BOX_FORMAT = "nac-boxes/1"
REPORT_FORMAT = "nac-report/1"
INFERENCE_FORMAT = "nac-inference/1"
SELECTION_FORMAT = "nac-selection/1"
TRUTH_FORMAT = "nac-truth/1"


def dumps(document: dict) -> str:
    """Canonical serialization used for every document this package writes."""
    return json.dumps(document, indent=2) + "\n"


def _loads(text: str, expected_format: str) -> dict:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(document, dict):
        raise ValidationError("document root must be a JSON object")
    declared = document.get("format")
    if declared != expected_format:
        raise ValidationError(
            f"format: expected {expected_format!r}, got {declared!r}"
        )
    return document


def _get(obj: dict, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected an object")
    if key not in obj:
        raise ValidationError(f"{path}: missing {key!r}")
    return obj[key]


def _as_int(value: Any, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValidationError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ValidationError(f"{path}: expected a string, got {value!r}")
    return value


def _as_list(value: Any, path: str, length: int | None = None) -> list:
    if not isinstance(value, list):
        raise ValidationError(f"{path}: expected an array")
    if length is not None and len(value) != length:
        raise ValidationError(
            f"{path}: expected {length} entries, got {len(value)}"
        )
    return value


def _as_point(value: Any, path: str) -> tuple[float, float]:
    pair = _as_list(value, path, length=2)
    return _as_number(pair[0], f"{path}[0]"), _as_number(pair[1], f"{path}[1]")


# --- keypoint files ---------------------------------------------------------


def parse_keypoints(text: str) -> list[ProposalSet]:
    """Parse and validate a keypoint document into per-image proposal sets."""
    document = _loads(text, KEYPOINT_FORMAT)
    num_proposals = _as_int(_get(document, "num_proposals", "$"), "num_proposals")
    if num_proposals < 1:
        raise ValidationError(f"num_proposals: must be >= 1, got {num_proposals}")
    images = _as_list(_get(document, "images", "$"), "images")

    data: list[ProposalSet] = []
    seen_ids: set[str] = set()
    for index, entry in enumerate(images):
        path = f"images[{index}]"
        image_id = _as_str(_get(entry, "id", path), f"{path}.id")
        label = f"{path} (id {image_id!r})"
        if image_id in seen_ids:
            raise ValidationError(f"{label}: duplicate image id")
        seen_ids.add(image_id)
        width = _as_int(_get(entry, "width", label), f"{label}.width")
        height = _as_int(_get(entry, "height", label), f"{label}.height")
        if width < 1 or height < 1:
            raise ValidationError(f"{label}: width and height must be >= 1")
        points_raw = _as_list(
            _get(entry, "points", label), f"{label}.points", num_proposals
        )
        visible_raw = _as_list(
            _get(entry, "visible", label), f"{label}.visible", num_proposals
        )
        points = np.zeros((num_proposals, 2))
        visible = np.zeros(num_proposals, dtype=bool)
        for p in range(num_proposals):
            flag = visible_raw[p]
            if not isinstance(flag, bool):
                raise ValidationError(
                    f"{label}.visible[{p}]: expected a boolean, got {flag!r}"
                )
            visible[p] = flag
            x, y = _as_point(points_raw[p], f"{label}.points[{p}]")
            points[p] = (x, y)
            if flag and not (
                np.isfinite(x) and np.isfinite(y) and 0 <= x <= 1 and 0 <= y <= 1
            ):
                raise ValidationError(
                    f"{label}.points[{p}]: visible location must lie in [0,1]^2"
                )
        data.append(
            ProposalSet(ImageMeta(image_id, width, height), points, visible)
        )
    return data


def dump_keypoints(data: Sequence[ProposalSet]) -> str:
    if not data:
        raise ValidationError("cannot serialize an empty dataset")
    num_proposals = data[0].num_parts
    images = []
    for proposals in data:
        images.append(
            {
                "id": proposals.meta.image_id,
                "width": proposals.meta.width,
                "height": proposals.meta.height,
                "points": [
                    [float(x), float(y)] for x, y in proposals.locations
                ],
                "visible": [bool(flag) for flag in proposals.visible],
            }
        )
    return dumps(
        {
            "format": KEYPOINT_FORMAT,
            "num_proposals": num_proposals,
            "images": images,
        }
    )


# --- model files ------------------------------------------------------------


def model_document(model: ConstellationModel) -> dict:
    """Canonical document for a model; shifts are stored per selected part."""
    views = []
    for v in range(model.num_views):
        parts = model.view_parts(v)
        views.append(
            {
                "parts": parts,
                "shifts": [
                    [float(model.shifts[v, p, 0]), float(model.shifts[v, p, 1])]
                    for p in parts
                ],
            }
        )
    return {
        "format": MODEL_FORMAT,
        "P": model.num_parts,
        "V": model.num_views,
        "M": model.parts_per_view,
        "views": views,
    }


def model_from_document(document: dict) -> ConstellationModel:
    """Validate a loaded model document.

    Shifts are stored only for selected parts; unselected parts come back
    with a zero shift, which the objective never reads.
    """
    declared = document.get("format") if isinstance(document, dict) else None
    if declared != MODEL_FORMAT:
        raise ValidationError(
            f"format: expected {MODEL_FORMAT!r}, got {declared!r}"
        )
    num_parts = _as_int(_get(document, "P", "$"), "P")
    num_views = _as_int(_get(document, "V", "$"), "V")
    parts_per_view = _as_int(_get(document, "M", "$"), "M")
    if num_parts < 1 or num_views < 1:
        raise ValidationError("P and V must be >= 1")
    if not 1 <= parts_per_view <= num_parts:
        raise ValidationError(f"M: must lie in [1, {num_parts}], got {parts_per_view}")
    views = _as_list(_get(document, "views", "$"), "views", num_views)

    selected = np.zeros((num_views, num_parts), dtype=bool)
    shifts = np.zeros((num_views, num_parts, 2))
    for v, entry in enumerate(views):
        path = f"views[{v}]"
        parts = _as_list(_get(entry, "parts", path), f"{path}.parts", parts_per_view)
        view_shifts = _as_list(
            _get(entry, "shifts", path), f"{path}.shifts", parts_per_view
        )
        previous = -1
        for j, part in enumerate(parts):
            part = _as_int(part, f"{path}.parts[{j}]")
            if part <= previous:
                raise ValidationError(
                    f"{path}.parts: indices must be strictly ascending"
                )
            if part >= num_parts:
                raise ValidationError(
                    f"{path}.parts[{j}]: index {part} out of range for P={num_parts}"
                )
            previous = part
            dx, dy = _as_point(view_shifts[j], f"{path}.shifts[{j}]")
            if not (
                np.isfinite(dx)
                and np.isfinite(dy)
                and -1 <= dx <= 1
                and -1 <= dy <= 1
            ):
                raise ValidationError(
                    f"{path}.shifts[{j}]: components must lie in [-1,1]"
                )
            selected[v, part] = True
            shifts[v, part] = (dx, dy)
    return ConstellationModel(selected, shifts)


def parse_model(text: str) -> ConstellationModel:
    return model_from_document(_loads(text, MODEL_FORMAT))


def dump_model(model: ConstellationModel) -> str:
    return dumps(model_document(model))


# --- box files --------------------------------------------------------------


def parse_boxes(text: str) -> list[BoxSet]:
    document = _loads(text, BOX_FORMAT)
    images = _as_list(_get(document, "images", "$"), "images")
    sets: list[BoxSet] = []
    seen_ids: set[str] = set()
    for index, entry in enumerate(images):
        path = f"images[{index}]"
        image_id = _as_str(_get(entry, "id", path), f"{path}.id")
        label = f"{path} (id {image_id!r})"
        if image_id in seen_ids:
            raise ValidationError(f"{label}: duplicate image id")
        seen_ids.add(image_id)
        boxes = []
        for j, raw in enumerate(_as_list(_get(entry, "boxes", label), f"{label}.boxes")):
            quad = _as_list(raw, f"{label}.boxes[{j}]", length=4)
            x0, y0, x1, y1 = (
                _as_number(quad[k], f"{label}.boxes[{j}][{k}]") for k in range(4)
            )
            if not (x0 < x1 and y0 < y1):
                raise ValidationError(
                    f"{label}.boxes[{j}]: requires x0 < x1 and y0 < y1"
                )
            boxes.append(Box(x0, y0, x1, y1))
        sets.append(BoxSet(image_id, tuple(boxes)))
    return sets


def dump_boxes(sets: Sequence[BoxSet]) -> str:
    images = []
    for box_set in sets:
        images.append(
            {
                "id": box_set.image_id,
                "boxes": [
                    [float(b.x0), float(b.y0), float(b.x1), float(b.y1)]
                    for b in box_set.boxes
                ],
            }
        )
    return dumps({"format": BOX_FORMAT, "images": images})


# --- fit reports ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReportDocument:
    """Parsed fit report: objective, restart trace, and per-image latents."""

    objective: float
    best_restart: int
    iterations_per_restart: tuple[int, ...]
    objectives_per_restart: tuple[float, ...]
    num_views: int
    parts_per_view: int
    image_ids: tuple[str, ...]
    latent: LatentState


def dump_report(report: FitReport, data: Sequence[ProposalSet]) -> str:
    images = [
        {
            "id": proposals.meta.image_id,
            "view": int(report.latent.view_of[i]),
            "root": [
                float(report.latent.roots[i, 0]),
                float(report.latent.roots[i, 1]),
            ],
        }
        for i, proposals in enumerate(data)
    ]
    return dumps(
        {
            "format": REPORT_FORMAT,
            "objective": report.objective,
            "best_restart": report.best_restart,
            "iterations_per_restart": list(report.iterations_per_restart),
            "objectives_per_restart": list(report.objectives_per_restart),
            "num_views": report.model.num_views,
            "parts_per_view": report.model.parts_per_view,
            "images": images,
        }
    )


def parse_report(text: str) -> ReportDocument:
    document = _loads(text, REPORT_FORMAT)
    objective = _as_number(_get(document, "objective", "$"), "objective")
    best_restart = _as_int(_get(document, "best_restart", "$"), "best_restart")
    iterations = tuple(
        _as_int(v, f"iterations_per_restart[{i}]")
        for i, v in enumerate(
            _as_list(_get(document, "iterations_per_restart", "$"), "iterations_per_restart")
        )
    )
    objectives = tuple(
        _as_number(v, f"objectives_per_restart[{i}]")
        for i, v in enumerate(
            _as_list(_get(document, "objectives_per_restart", "$"), "objectives_per_restart")
        )
    )
    num_views = _as_int(_get(document, "num_views", "$"), "num_views")
    parts_per_view = _as_int(_get(document, "parts_per_view", "$"), "parts_per_view")
    images = _as_list(_get(document, "images", "$"), "images")
    ids = []
    views = np.zeros(len(images), dtype=np.int64)
    roots = np.zeros((len(images), 2))
    for index, entry in enumerate(images):
        path = f"images[{index}]"
        ids.append(_as_str(_get(entry, "id", path), f"{path}.id"))
        view = _as_int(_get(entry, "view", path), f"{path}.view")
        if not 0 <= view < num_views:
            raise ValidationError(
                f"{path}.view: index {view} out of range for {num_views} views"
            )
        views[index] = view
        roots[index] = _as_point(_get(entry, "root", path), f"{path}.root")
    return ReportDocument(
        objective=objective,
        best_restart=best_restart,
        iterations_per_restart=iterations,
        objectives_per_restart=objectives,
        num_views=num_views,
        parts_per_view=parts_per_view,
        image_ids=tuple(ids),
        latent=LatentState(roots, views),
    )


# --- path helpers -----------------------------------------------------------


def read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def load_keypoints(path: str) -> list[ProposalSet]:
    return parse_keypoints(read_text(path))


def save_keypoints(path: str, data: Sequence[ProposalSet]) -> None:
    write_text(path, dump_keypoints(data))


def load_model(path: str) -> ConstellationModel:
    return parse_model(read_text(path))


def save_model(path: str, model: ConstellationModel) -> None:
    write_text(path, dump_model(model))


def load_boxes(path: str) -> list[BoxSet]:
    return parse_boxes(read_text(path))


def save_boxes(path: str, sets: Sequence[BoxSet]) -> None:
    write_text(path, dump_boxes(sets))


def load_report(path: str) -> ReportDocument:
    return parse_report(read_text(path))
