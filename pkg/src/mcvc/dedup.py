"""Duplicate-video detection from boundary-frame hashes.

Two videos count as duplicates when the average-hashes of both their first
and last non-black frames match exactly. Within each duplicate group the
earliest-posted video is the original (ties broken by video_id).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .embstore import LUMA_BYTES, EmbeddingStore, FrameRecord

DEFAULT_BLACK_THRESHOLD = 5.0  # brightness units; matches the frame-validation floor


@dataclass
class VideoHash:
    video_id: str
    first_hash: int
    last_hash: int
    posted_at: datetime
    all_black: bool = False  # no frame exceeded the black threshold


@dataclass
class DedupReport:
    originals: set[str] = field(default_factory=set)
    duplicates: dict[str, str] = field(default_factory=dict)  # duplicate -> original

    @property
    def n_videos(self) -> int:
        return len(self.originals) + len(self.duplicates)

    def to_dict(self) -> dict:
        return {
            "originals": sorted(self.originals),
            "duplicates": dict(sorted(self.duplicates.items())),
            "counts": {
                "videos": self.n_videos,
                "originals": len(self.originals),
                "duplicates": len(self.duplicates),
            },
        }


def boundary_frames(frames: list[FrameRecord],
                    black_threshold: float = DEFAULT_BLACK_THRESHOLD) -> tuple[int, int, bool]:
    """Locate the first and last non-black frame.

    Returns (first_idx, last_idx, all_black) as positions into ``frames``.
    A frame is non-black when its brightness exceeds ``black_threshold``;
    if every frame is black the literal first and last positions are
    returned with the all_black flag set.
    """
    if not frames:
        raise ValueError("boundary_frames requires a non-empty frame list")
    first = next((i for i, f in enumerate(frames) if f.brightness > black_threshold), None)
    if first is None:
        return 0, len(frames) - 1, True
    last = next(i for i in range(len(frames) - 1, -1, -1)
                if frames[i].brightness > black_threshold)
    return first, last, False


def frame_hash(luma8x8: bytes) -> int:
    """64-bit average-hash of an 8x8 luma thumbnail.

    Bit b is set iff byte b exceeds the mean of all 64 bytes; bits are
    packed row-major with bit 0 as the most significant bit.
    """
    if len(luma8x8) != LUMA_BYTES:
        raise ValueError(f"luma8x8 must be exactly {LUMA_BYTES} bytes, got {len(luma8x8)}")
    mean = sum(luma8x8) / LUMA_BYTES
    h = 0
    for b, value in enumerate(luma8x8):
        if value > mean:
            h |= 1 << (63 - b)
    return h


def hash_video(video_id: str, frames: list[FrameRecord], posted_at: datetime,
               black_threshold: float = DEFAULT_BLACK_THRESHOLD) -> VideoHash:
    first, last, all_black = boundary_frames(frames, black_threshold)
    return VideoHash(
        video_id=video_id,
        first_hash=frame_hash(frames[first].luma8x8),
        last_hash=frame_hash(frames[last].luma8x8),
        posted_at=posted_at,
        all_black=all_black,
    )


def mark_duplicates(hashes: list[VideoHash]) -> DedupReport:
    """Group videos whose (first_hash, last_hash) pairs match exactly.

    The earliest posted_at in each group is the original; equal timestamps
    fall back to the lexicographically smallest video_id. The result is
    independent of input order.
    """
    groups: dict[tuple[int, int], list[VideoHash]] = {}
    for vh in hashes:
        groups.setdefault((vh.first_hash, vh.last_hash), []).append(vh)

    report = DedupReport()
    for members in groups.values():
        members.sort(key=lambda vh: (vh.posted_at, vh.video_id))
        original = members[0]
        report.originals.add(original.video_id)
        for dup in members[1:]:
            report.duplicates[dup.video_id] = original.video_id
    return report


def dedup_store(store: EmbeddingStore,
                black_threshold: float = DEFAULT_BLACK_THRESHOLD) -> DedupReport:
    """Hash every video in the store and mark duplicates."""
    hashes = [hash_video(v.video_id, v.frames, v.posted_at, black_threshold)
              for v in store.manifest if v.frames]
    return mark_duplicates(hashes)
