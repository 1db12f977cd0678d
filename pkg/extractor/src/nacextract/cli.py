"""Command line: extract keypoint proposal files from an image directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, ExtractError
from .extract import ExtractionConfig, extract_keypoints, write_document

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


def find_images(root: Path) -> list[tuple[str, Path]]:
    """(image_id, path) pairs for every image under root, sorted by id."""
    pairs = [
        (path.relative_to(root).as_posix(), path)
        for path in root.rglob("*")
        if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES
    ]
    return sorted(pairs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nacextract",
        description="Compute per-channel keypoint proposals from images "
        "via gradient activation maps.",
    )
    parser.add_argument("command", choices=["extract"])
    parser.add_argument("--images", required=True, help="directory of images")
    parser.add_argument("--layer", required=True, help="layer name, e.g. relu3")
    parser.add_argument("--out", required=True, help="keypoint file to write")
    parser.add_argument("--model", default="toy:0")
    parser.add_argument("--input-size", type=int, default=64)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--weights", default=None, help="state dict to load")
    parser.add_argument(
        "--log", default=None, help="sidecar log path (default: <out>.skipped.json)"
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    root = Path(args.images)
    if not root.is_dir():
        print(f"error: {args.images} is not a directory", file=sys.stderr)
        return 1
    try:
        cfg = ExtractionConfig(
            layer=args.layer,
            model=args.model,
            input_size=args.input_size,
            batch_size=args.batch_size,
            weights=args.weights,
        )
        document, skipped = extract_keypoints(find_images(root), cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    write_document(args.out, document)
    if skipped:
        sidecar = args.log or f"{args.out}.skipped.json"
        write_document(sidecar, {"skipped": skipped})
        print(f"skipped {len(skipped)} unreadable images, see {sidecar}")
    print(
        f"wrote {len(document['images'])} images x "
        f"{document['num_proposals']} proposals to {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
