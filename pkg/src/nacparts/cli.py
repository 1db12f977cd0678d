"""Command-line surface tying the pipeline together.

Subcommands: ``fit`` learns a model from a keypoint file, ``infer`` runs
latent estimation under a saved model, ``select-parts`` aggregates part
usage into the final part set, ``filter-boxes`` screens augmentation box
proposals, and ``synth``/``oracle`` provide the synthetic generator and the
exhaustive reference solver.

Exit codes: 0 success, 1 validation or structural error, 2 configuration
error, 3 refused resource bound.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import fileio
from .errors import (
    ConfigError,
    EnumerationLimitError,
    StructuralError,
    ValidationError,
)
from .estimation import FitConfig, fit
from .inference import infer
from .model import ConstellationModel, ProposalSet
from .selection import best_fitting_parts, count_part_usage, filter_boxes, top_k_parts
from .synth import SynthSpec, generate, oracle_fit


def _check_report_matches(
    data: list[ProposalSet],
    model: ConstellationModel,
    report: fileio.ReportDocument,
) -> None:
    if report.num_views != model.num_views or report.parts_per_view != model.parts_per_view:
        raise StructuralError(
            f"report was fitted with {report.num_views} views x "
            f"{report.parts_per_view} parts, model has {model.num_views} x "
            f"{model.parts_per_view}"
        )
    ids = tuple(proposals.meta.image_id for proposals in data)
    if report.image_ids != ids:
        raise StructuralError(
            "report images do not match the keypoint file (ids or order differ)"
        )
    if report.latent.view_of.size and report.latent.view_of.max() >= model.num_views:
        raise StructuralError("report contains view indices out of model range")


def _cmd_fit(args: argparse.Namespace) -> int:
    data = fileio.load_keypoints(args.keypoints)
    cfg = FitConfig(
        num_views=args.views,
        parts_per_view=args.parts_per_view,
        restarts=args.restarts,
        max_iters=args.max_iters,
        rng_seed=args.seed,
    )
    report = fit(data, cfg)
    fileio.save_model(args.out, report.model)
    fileio.write_text(args.report, fileio.dump_report(report, data))
    print(
        f"fitted {len(data)} images: objective {report.objective!r} "
        f"(best restart {report.best_restart}, "
        f"iterations {list(report.iterations_per_restart)})"
    )
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    data = fileio.load_keypoints(args.keypoints)
    model = fileio.load_model(args.model)
    records = []
    for proposals in data:
        result = infer(proposals, model, max_iters=args.max_iters)
        records.append(
            {
                "id": proposals.meta.image_id,
                "view": result.view,
                "root": [float(result.root[0]), float(result.root[1])],
                "parts": [int(p) for p in result.part_indices],
                "residuals": [float(r) for r in result.residuals],
            }
        )
    fileio.write_text(
        args.out, fileio.dumps({"format": fileio.INFERENCE_FORMAT, "images": records})
    )
    print(f"inferred {len(records)} images")
    return 0


def _cmd_select_parts(args: argparse.Namespace) -> int:
    data = fileio.load_keypoints(args.keypoints)
    model = fileio.load_model(args.model)
    report = fileio.load_report(args.report)
    _check_report_matches(data, model, report)
    counts = count_part_usage(data, model, report.latent)
    top = top_k_parts(counts, args.k)
    fileio.write_text(
        args.out,
        fileio.dumps(
            {
                "format": fileio.SELECTION_FORMAT,
                "counts": [int(c) for c in counts],
                "top_parts": top,
            }
        ),
    )
    print(f"top {args.k} parts: {top}")
    return 0


def _cmd_filter_boxes(args: argparse.Namespace) -> int:
    box_sets = fileio.load_boxes(args.boxes)
    data = fileio.load_keypoints(args.keypoints)
    model = fileio.load_model(args.model)
    report = fileio.load_report(args.report)
    _check_report_matches(data, model, report)

    index = {
        proposals.meta.image_id: i for i, proposals in enumerate(data)
    }
    unknown = [bs.image_id for bs in box_sets if bs.image_id not in index]
    if unknown:
        raise StructuralError(
            f"box file references unknown image ids: {', '.join(sorted(unknown))}"
        )

    filtered = []
    for box_set in box_sets:
        i = index[box_set.image_id]
        proposals = data[i]
        parts = best_fitting_parts(
            data, i, model, report.latent, count=args.best_parts
        )
        points = [
            (
                proposals.locations[p, 0] * proposals.meta.width,
                proposals.locations[p, 1] * proposals.meta.height,
            )
            for p in parts
        ]
        kept = filter_boxes(box_set, points, min_inside=args.min_inside)
        filtered.append(kept)
        print(f"{box_set.image_id}: kept {len(kept.boxes)}/{len(box_set.boxes)}")
    fileio.save_boxes(args.out, filtered)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        num_images=args.images,
        num_parts=args.proposals,
        num_views=args.views,
        parts_per_view=args.parts_per_view,
        noise_sigma=args.noise_sigma,
        visibility_rate=args.visibility_rate,
        rng_seed=args.seed,
        width=args.width,
        height=args.height,
    )
    result = generate(spec)
    fileio.save_keypoints(args.out, result.data)
    truth = {
        "format": fileio.TRUTH_FORMAT,
        "model": fileio.model_document(result.model),
        "views": [int(v) for v in result.latent.view_of],
        "roots": [[float(x), float(y)] for x, y in result.latent.roots],
        "clipped": int(result.clipped.sum()),
    }
    fileio.write_text(args.truth_out, fileio.dumps(truth))
    print(
        f"generated {spec.num_images} images with {spec.num_parts} proposals "
        f"({int(result.clipped.sum())} clipped placements)"
    )
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    data = fileio.load_keypoints(args.keypoints)
    best, winners = oracle_fit(
        data, args.views, args.parts_per_view, max_configurations=args.limit
    )
    print(f"best objective: {best!r}")
    print(f"optimal assignments: {len(winners)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nacparts",
        description="Fit and apply star-shaped part constellation models "
        "over keypoint proposal files.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_fit = commands.add_parser("fit", help="fit a constellation model")
    p_fit.add_argument("--keypoints", required=True)
    p_fit.add_argument("--views", type=int, default=5)
    p_fit.add_argument("--parts-per-view", type=int, default=10)
    p_fit.add_argument("--restarts", type=int, default=5)
    p_fit.add_argument("--max-iters", type=int, default=100)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True, help="model file to write")
    p_fit.add_argument("--report", required=True, help="fit report to write")
    p_fit.set_defaults(func=_cmd_fit)

    p_infer = commands.add_parser("infer", help="estimate latents for new images")
    p_infer.add_argument("--keypoints", required=True)
    p_infer.add_argument("--model", required=True)
    p_infer.add_argument("--max-iters", type=int, default=50)
    p_infer.add_argument("--out", required=True)
    p_infer.set_defaults(func=_cmd_infer)

    p_select = commands.add_parser(
        "select-parts", help="aggregate part usage into the final part set"
    )
    p_select.add_argument("--keypoints", required=True)
    p_select.add_argument("--model", required=True)
    p_select.add_argument("--report", required=True)
    p_select.add_argument("--k", type=int, default=10)
    p_select.add_argument("--out", required=True)
    p_select.set_defaults(func=_cmd_select_parts)

    p_filter = commands.add_parser(
        "filter-boxes", help="keep box proposals that contain enough parts"
    )
    p_filter.add_argument("--boxes", required=True)
    p_filter.add_argument("--keypoints", required=True)
    p_filter.add_argument("--model", required=True)
    p_filter.add_argument("--report", required=True)
    p_filter.add_argument("--min-inside", type=int, default=3)
    p_filter.add_argument("--best-parts", type=int, default=5)
    p_filter.add_argument("--out", required=True)
    p_filter.set_defaults(func=_cmd_filter_boxes)

    p_synth = commands.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--images", type=int, default=100)
    p_synth.add_argument("--proposals", type=int, default=30)
    p_synth.add_argument("--views", type=int, default=5)
    p_synth.add_argument("--parts-per-view", type=int, default=10)
    p_synth.add_argument("--noise-sigma", type=float, default=0.0)
    p_synth.add_argument("--visibility-rate", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--width", type=int, default=224)
    p_synth.add_argument("--height", type=int, default=224)
    p_synth.add_argument("--out", required=True, help="keypoint file to write")
    p_synth.add_argument("--truth-out", required=True, help="truth file to write")
    p_synth.set_defaults(func=_cmd_synth)

    p_oracle = commands.add_parser(
        "oracle", help="exhaustive global optimum for small instances"
    )
    p_oracle.add_argument("--keypoints", required=True)
    p_oracle.add_argument("--views", type=int, required=True)
    p_oracle.add_argument("--parts-per-view", type=int, required=True)
    p_oracle.add_argument("--limit", type=int, default=10**6)
    p_oracle.set_defaults(func=_cmd_oracle)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EnumerationLimitError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
