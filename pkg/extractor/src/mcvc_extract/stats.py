"""Per-frame grayscale statistics and the 8x8 luma thumbnail."""

from __future__ import annotations

import cv2
import numpy as np


def frame_stats(frame_bgr: np.ndarray) -> tuple[float, float, bytes]:
    """(gray_std, brightness, luma8x8) for one BGR uint8 frame.

    Grayscale uses the BT.601 luma weights (cv2 BGR2GRAY: 0.299 R +
    0.587 G + 0.114 B); the thumbnail is an area-averaged 8x8 downsample.
    """
    gray = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2GRAY)
    thumb = cv2.resize(gray, (8, 8), interpolation=cv2.INTER_AREA)
    return float(gray.std()), float(gray.mean()), thumb.tobytes()
