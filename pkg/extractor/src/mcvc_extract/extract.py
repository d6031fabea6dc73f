"""Extraction jobs: decode videos, compute frame stats, embed, write the store.

The emitted store is a superset of what downstream selection may pick:
every position on the sampling-rate grid plus the first and last frame
(required for duplicate hashing). Row indices follow (video order, frame
order), so re-running a job reproduces the same files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from mcvc.embstore import EmbeddingStore, FrameRecord, VideoEntry, validate_store, write_store

from .backbones import Backbone, load_backbone
from .stats import frame_stats
from .video import DecodeError, probe, read_frames, sample_positions

logger = logging.getLogger("mcvc_extract")

VIDEO_SUFFIXES = (".mp4", ".avi", ".mov", ".mkv", ".webm")


@dataclass
class ExtractJob:
    videos: list[Path]
    out_dir: Path
    backbone: str = "dinov2"
    fps: float = 1.0
    device: str = "cpu"
    pretrained: bool = True
    posted_at: dict[str, str] = field(default_factory=dict)  # video_id -> ISO timestamp


def find_videos(directory: Path | str) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir()
                  if p.suffix.lower() in VIDEO_SUFFIXES and p.is_file())


def _posted_at(job: ExtractJob, video_id: str, path: Path) -> datetime:
    if video_id in job.posted_at:
        value = job.posted_at[video_id].replace("Z", "+00:00")
        ts = datetime.fromisoformat(value)
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        return ts.astimezone(timezone.utc)
    # sidecar metadata is preferred; mtime is the fallback provenance
    return datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc)


def _extract_video(job: ExtractJob, backbone: Backbone, path: Path,
                   next_row: int) -> tuple[VideoEntry, np.ndarray]:
    duration_s, total = probe(path)
    positions = sample_positions(total, total / duration_s, job.fps)
    frames_bgr = read_frames(path, positions)
    embeddings, confidences = backbone.embed(frames_bgr)

    records = []
    for offset, (pos, frame) in enumerate(zip(positions, frames_bgr)):
        gray_std, brightness, luma = frame_stats(frame)
        records.append(FrameRecord(
            index=pos,
            timestamp_s=pos * duration_s / total,
            embedding_row=next_row + offset,
            gray_std=gray_std,
            brightness=brightness,
            confidence=float(confidences[offset]) if confidences is not None else None,
            luma8x8=luma,
        ))
    video_id = path.stem
    entry = VideoEntry(
        video_id=video_id,
        posted_at=_posted_at(job, video_id, path),
        duration_s=duration_s,
        frame_count_total=total,
        frames=records,
    )
    return entry, embeddings


def extract(job: ExtractJob) -> EmbeddingStore:
    """Run the whole job and write the store to job.out_dir.

    Undecodable videos are skipped with a log entry; a backbone that
    fails to load aborts the job (BackboneLoadError propagates).
    """
    if not job.videos:
        raise ValueError("no input videos")
    backbone = load_backbone(job.backbone, job.device, job.pretrained)
    logger.info("backbone %s (dim=%d, confidence=%s)",
                backbone.tag, backbone.dim, backbone.has_confidence)

    manifest: list[VideoEntry] = []
    blocks: list[np.ndarray] = []
    next_row = 0
    for path in sorted(job.videos):
        try:
            entry, embeddings = _extract_video(job, backbone, path, next_row)
        except DecodeError as exc:
            logger.error("skipping %s: %s", path.name, exc)
            continue
        manifest.append(entry)
        blocks.append(embeddings)
        next_row += embeddings.shape[0]
        logger.info("%s: %d frames embedded", entry.video_id, len(entry.frames))

    if not manifest:
        raise ValueError("every input video failed to decode")
    matrix = np.concatenate(blocks).astype(np.float32)
    store = EmbeddingStore(manifest=manifest, dim=backbone.dim, matrix=matrix,
                           backbone_tag=backbone.tag)
    violations = validate_store(store)
    if violations:  # internal error: the extractor must emit valid stores
        raise RuntimeError(f"extractor produced an invalid store: {violations[:3]}")
    write_store(store, job.out_dir)
    logger.info("wrote %d videos / %d frame rows to %s",
                len(manifest), store.rows, job.out_dir)
    return store
