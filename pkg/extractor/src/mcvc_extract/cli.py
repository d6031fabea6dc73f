"""mcvc-extract command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .backbones import BACKBONES, BackboneLoadError
from .extract import ExtractJob, extract, find_videos


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcvc-extract",
        description="Decode videos, embed their frames, and emit an mcvc embedding store",
    )
    parser.add_argument("--videos", required=True,
                        help="directory of video files (mp4/avi/mov/mkv/webm)")
    parser.add_argument("--backbone", choices=list(BACKBONES), default="dinov2")
    parser.add_argument("--fps", type=float, default=1.0,
                        help="frame sampling rate (default 1 fps)")
    parser.add_argument("--out", required=True, help="output store directory")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--no-pretrained", action="store_true",
                        help="seeded random weights instead of downloading checkpoints "
                             "(offline smoke runs; embeddings carry no semantics)")
    parser.add_argument("--metadata",
                        help="JSON file mapping video_id to posted_at (ISO-8601); "
                             "file mtime is used otherwise")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    videos = find_videos(args.videos)
    if not videos:
        print(f"error: no video files found in {args.videos}", file=sys.stderr)
        return 2
    posted_at = {}
    if args.metadata:
        posted_at = json.loads(Path(args.metadata).read_text())
    job = ExtractJob(
        videos=videos,
        out_dir=Path(args.out),
        backbone=args.backbone,
        fps=args.fps,
        device=args.device,
        pretrained=not args.no_pretrained,
        posted_at=posted_at,
    )
    try:
        extract(job)
    except BackboneLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
