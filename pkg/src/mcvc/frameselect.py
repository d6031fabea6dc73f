"""Frame sampling plans: static uniform spacing or diversity-based selection.

Planning happens on frame *positions* in the source video. A position is
usable when the store actually holds a frame there and that frame passes
validation; failed positions are repaired to the nearest valid frame
within a small window, or skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .embstore import EmbeddingStore, FrameRecord, VideoEntry


@dataclass
class SelectionParams:
    fps: float = 1.0            # sampling rate used to size the plan
    n_min: int = 4
    n_max: int = 100
    black_low: float = 5.0      # brightness floor
    bright_high: float = 250.0  # brightness ceiling
    gray_std_min: float = 10.0  # grayscale-std floor (color-uniform filter)
    repair_window: int = 5

    def __post_init__(self) -> None:
        if not (0 < self.n_min <= self.n_max):
            raise ValueError(f"need 0 < n_min <= n_max, got n_min={self.n_min} n_max={self.n_max}")
        for name in ("black_low", "bright_high", "gray_std_min"):
            value = getattr(self, name)
            if not (0 <= value <= 255):
                raise ValueError(f"{name}={value} outside [0, 255]")


@dataclass
class SelectionPlan:
    video_id: str
    mode: str                       # "static" | "dynamic"
    indices: list[int] = field(default_factory=list)  # sorted unique frame positions
    skipped: list[int] = field(default_factory=list)  # positions dropped after failed repair

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "mode": self.mode,
                "indices": self.indices, "skipped": self.skipped}


def plan_sample_count(duration_s: float, params: SelectionParams) -> int:
    """Number of frames to sample: floor(duration * fps) clamped to [n_min, n_max]."""
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    n = math.floor(duration_s * params.fps)
    return min(max(n, params.n_min), params.n_max)


def static_indices(total_frames: int, n: int) -> list[int]:
    """Evenly spaced frame positions: floor(i * (T-1) / (n-1)) for i in 0..n-1.

    n is clamped to the frame count; n = 1 yields [0]. The result is
    deduplicated and sorted, always starts at 0 and (for n >= 2) ends at T-1.
    """
    if total_frames < 1:
        raise ValueError("total_frames must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    n = min(n, total_frames)
    if n == 1:
        return [0]
    out = sorted({i * (total_frames - 1) // (n - 1) for i in range(n)})
    return out


def validate_frame(rec: FrameRecord, params: SelectionParams) -> tuple[bool, Optional[str]]:
    """Validity check with a deterministic reason order.

    Checks, in order: color uniformity, darkness, overexposure, corruption
    (non-finite stats). Returns (True, None) for a valid frame.
    """
    if rec.gray_std < params.gray_std_min:
        return False, "uniform"
    if rec.brightness < params.black_low:
        return False, "dark"
    if rec.brightness > params.bright_high:
        return False, "overexposed"
    if not (math.isfinite(rec.gray_std) and math.isfinite(rec.brightness)):
        return False, "corrupted"
    return True, None


def repair_index(idx: int, validity: Sequence[bool], window: int = 5) -> Optional[int]:
    """Nearest valid position within +/-window of idx; ties go to the earlier frame.

    Returns idx unchanged when it is already valid, or None when the whole
    window holds no valid frame (the position is skipped).
    """
    if not (0 <= idx < len(validity)):
        raise ValueError(f"idx {idx} outside [0, {len(validity)})")
    if validity[idx]:
        return idx
    for dist in range(1, window + 1):
        left = idx - dist
        if left >= 0 and validity[left]:
            return left
        right = idx + dist
        if right < len(validity) and validity[right]:
            return right
    return None


def diverse_indices(descriptors: np.ndarray, n: int) -> list[int]:
    """Farthest-point sampling under cosine distance.

    Starts from index 0 and repeatedly adds the frame with the largest
    minimum cosine distance to the selected set (ties to the smallest
    index) until n frames are chosen or the input is exhausted.
    """
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.ndim != 2 or descriptors.shape[0] == 0:
        raise ValueError("descriptors must be a non-empty 2-D array")
    if n < 1:
        raise ValueError("n must be >= 1")

    norms = np.linalg.norm(descriptors, axis=1)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise ValueError(f"descriptor {zero[0]} has zero norm; cosine distance undefined")
    unit = descriptors / norms[:, None]

    count = descriptors.shape[0]
    n = min(n, count)
    selected = [0]
    # min cosine distance of each frame to the selected set
    min_dist = 1.0 - unit @ unit[0]
    min_dist[0] = -np.inf
    for _ in range(n - 1):
        # argmax returns the first maximal index, which is the tie-break we want
        best = int(np.argmax(min_dist))
        selected.append(best)
        min_dist = np.minimum(min_dist, 1.0 - unit @ unit[best])
        min_dist[best] = -np.inf
    return sorted(selected)


def build_plan(entry: VideoEntry, store: EmbeddingStore, params: SelectionParams,
               mode: str = "static") -> SelectionPlan:
    """Produce a selection plan for one video over the frames the store holds.

    Static mode spreads positions over the full source video and repairs
    picks that land on missing or invalid frames. Dynamic mode runs
    farthest-point sampling over the valid frames' embeddings.
    """
    if mode not in ("static", "dynamic"):
        raise ValueError(f"unknown selection mode {mode!r}")
    n = plan_sample_count(entry.duration_s, params)
    by_position = {rec.index: rec for rec in entry.frames}
    total = max(entry.frame_count_total, 1)

    if mode == "static":
        validity = [False] * total
        for pos, rec in by_position.items():
            if pos < total:
                validity[pos] = validate_frame(rec, params)[0]
        chosen: set[int] = set()
        skipped: list[int] = []
        for target in static_indices(total, n):
            repaired = repair_index(target, validity, params.repair_window)
            if repaired is None:
                skipped.append(target)
            else:
                chosen.add(repaired)
        return SelectionPlan(entry.video_id, mode, sorted(chosen), skipped)

    valid_positions = [rec.index for rec in entry.frames
                       if validate_frame(rec, params)[0]]
    if not valid_positions:
        return SelectionPlan(entry.video_id, mode, [], [])
    rows = [by_position[p].embedding_row for p in valid_positions]
    picks = diverse_indices(store.matrix[rows], min(n, len(valid_positions)))
    return SelectionPlan(entry.video_id, mode, sorted(valid_positions[i] for i in picks), [])
