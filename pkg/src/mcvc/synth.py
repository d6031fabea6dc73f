"""Synthetic planted-cluster stores for tests and demos.

Videos are Gaussian blobs around cluster centers that share a common
baseline direction, so cross-cluster cosine similarity sits near a known
positive level while within-cluster similarity stays close to 1. That
gives calibration sweeps a wide recovery band and makes the planted
partition the unambiguous ground truth.
"""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np

from .embstore import EmbeddingStore, FrameRecord, VideoEntry


def blob_centers(n_clusters: int, dim: int, center_similarity: float = 0.3) -> np.ndarray:
    """Unit-norm centers with pairwise cosine similarity = center_similarity.

    Built as sqrt(beta) * shared_axis + sqrt(1-beta) * private_axis, which
    needs dim >= n_clusters + 1.
    """
    if not (0.0 <= center_similarity < 1.0):
        raise ValueError(f"center_similarity must be in [0, 1), got {center_similarity}")
    if dim < n_clusters + 1:
        raise ValueError(f"dim={dim} too small for {n_clusters} clusters (need >= {n_clusters + 1})")
    centers = np.zeros((n_clusters, dim))
    centers[:, 0] = np.sqrt(center_similarity)
    for i in range(n_clusters):
        centers[i, i + 1] = np.sqrt(1.0 - center_similarity)
    return centers


def make_planted_store(n_videos: int = 200, n_clusters: int = 4, dim: int = 32,
                       seed: int = 0, frames_min: int = 4, frames_max: int = 8,
                       center_similarity: float = 0.3, video_noise: float = 0.06,
                       frame_noise: float = 0.02,
                       with_confidence: bool = True) -> tuple[EmbeddingStore, np.ndarray]:
    """Build a store of n_videos spread round-robin over planted blobs.

    Returns (store, true_labels). Blob separation is ||c_i - c_j|| =
    sqrt(2 - 2*center_similarity), far above 6x the per-axis video noise
    at the defaults. Every frame carries valid stats and a distinct
    random thumbnail, so the store passes validation and dedups cleanly.
    """
    if n_videos < n_clusters:
        raise ValueError("need at least one video per cluster")
    rng = np.random.default_rng(seed)
    centers = blob_centers(n_clusters, dim, center_similarity)
    labels = np.array([i % n_clusters for i in range(n_videos)], dtype=np.int64)

    manifest: list[VideoEntry] = []
    rows: list[np.ndarray] = []
    for i in range(n_videos):
        video_vec = centers[labels[i]] + video_noise * rng.standard_normal(dim)
        n_frames = int(rng.integers(frames_min, frames_max + 1))
        frames = []
        for f in range(n_frames):
            vec = video_vec + frame_noise * rng.standard_normal(dim)
            frames.append(FrameRecord(
                index=f,
                timestamp_s=float(f),
                embedding_row=len(rows),
                gray_std=float(rng.uniform(30.0, 80.0)),
                brightness=float(rng.uniform(60.0, 180.0)),
                confidence=float(rng.uniform(0.5, 1.0)) if with_confidence else None,
                luma8x8=bytes(rng.integers(0, 256, size=64, dtype=np.uint8)),
            ))
            rows.append(vec.astype(np.float32))
        posted = datetime(2019 + i % 4, 1 + (i // 4) % 12, 1 + i % 28, tzinfo=timezone.utc)
        manifest.append(VideoEntry(
            video_id=f"vid{i:05d}",
            posted_at=posted,
            duration_s=float(n_frames),
            frame_count_total=n_frames,
            frames=frames,
        ))

    matrix = np.stack(rows).astype(np.float32)
    store = EmbeddingStore(manifest=manifest, dim=dim, matrix=matrix,
                           backbone_tag=f"synthetic-seed{seed}")
    return store, labels
