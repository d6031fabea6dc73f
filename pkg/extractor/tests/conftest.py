"""Shared clip-generation fixtures (small MJPG/AVI files written with cv2)."""

from pathlib import Path

import cv2
import numpy as np
import pytest


def write_clip(path: Path, frames, fps: float = 8.0) -> Path:
    h, w = frames[0].shape[:2]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), fps, (w, h))
    assert writer.isOpened(), f"cannot open writer for {path}"
    for frame in frames:
        writer.write(frame)
    writer.release()
    return path


def textured_frames(n: int, size=(48, 64), phase: float = 0.0):
    """High-contrast moving pattern: valid stats, distinct thumbnails."""
    h, w = size
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
    out = []
    for t in range(n):
        wave = 127 + 120 * np.sin(xs / 6.0 + phase + t / 3.0) * np.cos(ys / 9.0 + phase)
        frame = np.clip(wave, 0, 255).astype(np.uint8)
        out.append(cv2.merge([frame, np.roll(frame, 3, axis=1), frame[::-1]]))
    return out


def black_frames(n: int, size=(48, 64)):
    h, w = size
    return [np.zeros((h, w, 3), dtype=np.uint8) for _ in range(n)]


@pytest.fixture(scope="session")
def fixture_clips(tmp_path_factory):
    """Solid-black clip, byte-identical duplicate pair, distinct textured clip."""
    root = tmp_path_factory.mktemp("clips")
    write_clip(root / "dup_a.avi", textured_frames(24, phase=0.0))
    data = (root / "dup_a.avi").read_bytes()
    (root / "dup_b.avi").write_bytes(data)  # exact byte copy
    write_clip(root / "black.avi", black_frames(24))
    write_clip(root / "textured.avi", textured_frames(24, phase=2.5))
    return root
