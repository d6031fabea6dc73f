"""Video decoding: container probing and frame grabs at planned positions."""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np


class DecodeError(RuntimeError):
    """Container cannot be opened or yields no frames."""


def probe(path: Path | str) -> tuple[float, int]:
    """Return (duration_s, frame_count_total) from container metadata."""
    cap = cv2.VideoCapture(str(path))
    try:
        if not cap.isOpened():
            raise DecodeError(f"cannot open video: {path}")
        frames = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        fps = cap.get(cv2.CAP_PROP_FPS)
        if frames <= 0 or fps <= 0:
            raise DecodeError(f"no decodable frames in {path} (frames={frames}, fps={fps})")
        return frames / fps, frames
    finally:
        cap.release()


def sample_positions(frame_count: int, native_fps: float, sample_fps: float) -> list[int]:
    """Frame positions at the requested sampling rate plus the first and
    last frame (needed for duplicate hashing)."""
    if sample_fps <= 0:
        raise ValueError(f"sample fps must be positive, got {sample_fps}")
    step = native_fps / sample_fps
    positions = {0, frame_count - 1}
    k = 0
    while True:
        pos = int(round(k * step))
        if pos >= frame_count:
            break
        positions.add(pos)
        k += 1
    return sorted(positions)


def read_frames(path: Path | str, positions: list[int]) -> list[np.ndarray]:
    """Decode the given frame positions (BGR uint8), in order.

    Reads sequentially instead of seeking: MJPEG/MP4 seeks are unreliable
    across codecs and sequential decode keeps results deterministic.
    """
    wanted = set(positions)
    cap = cv2.VideoCapture(str(path))
    try:
        if not cap.isOpened():
            raise DecodeError(f"cannot open video: {path}")
        out: dict[int, np.ndarray] = {}
        pos = 0
        last = max(wanted)
        while pos <= last:
            ok, frame = cap.read()
            if not ok:
                break
            if pos in wanted:
                out[pos] = frame
            pos += 1
        missing = wanted - set(out)
        if missing:
            raise DecodeError(f"{path}: could not decode frames {sorted(missing)[:5]}")
        return [out[p] for p in positions]
    finally:
        cap.release()
