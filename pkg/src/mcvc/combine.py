"""Aggregation of per-frame embeddings into one vector per video.

Five strategies: plain average, single best frame by classifier
confidence, and three softmax-weighted averages (distinctiveness,
confidence, temporal coherence). Weighted outputs are convex
combinations of the input frames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .embstore import read_matrix, write_matrix

METHODS = ("average", "max_confidence", "weighted_diversity",
           "weighted_confidence", "temporal_coherence")

# methods whose scores are fed through the temperature softmax
_WEIGHTED = ("weighted_diversity", "weighted_confidence", "temporal_coherence")

_DEFAULT_TAU = {"weighted_diversity": 2.0, "weighted_confidence": 2.0,
                "temporal_coherence": 1.0}


@dataclass
class CombineParams:
    method: str = "average"
    tau: Optional[float] = None  # None picks the per-method default
    radius: int = 1              # temporal window radius

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown combination method {self.method!r}, "
                             f"expected one of {METHODS}")
        if self.tau is None:
            self.tau = _DEFAULT_TAU.get(self.method, 1.0)
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")


@dataclass
class VideoEmbedding:
    video_id: str
    vector: np.ndarray
    method: str
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)


def _frames_array(frames: np.ndarray) -> np.ndarray:
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("frame embeddings must be a non-empty N x d array")
    return arr


def _unit_rows(frames: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(frames, axis=1)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise ValueError(f"frame {zero[0]} has a zero-norm embedding; cosine similarity undefined")
    return frames / norms[:, None]


def softmax_weights(scores: np.ndarray, tau: float) -> np.ndarray:
    """Temperature softmax over scores: exp(s_i/tau) / sum exp(s_k/tau).

    Numerically stable (max-shifted); weights are positive and sum to 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("softmax_weights requires at least one score")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    shifted = (scores - scores.max()) / tau
    exps = np.exp(shifted)
    return exps / exps.sum()


def combine_average(frames: np.ndarray) -> VideoEmbedding:
    """Arithmetic mean of all frame embeddings."""
    arr = _frames_array(frames)
    return VideoEmbedding("", arr.mean(axis=0), "average")


def combine_max_confidence(frames: np.ndarray, confidences: np.ndarray) -> VideoEmbedding:
    """The single frame with the highest classifier confidence (ties: first)."""
    arr = _frames_array(frames)
    conf = np.asarray(confidences, dtype=np.float64)
    if conf.shape != (arr.shape[0],):
        raise ValueError(f"need one confidence per frame, got {conf.shape} for {arr.shape[0]} frames")
    best = int(np.argmax(conf))
    return VideoEmbedding("", arr[best].copy(), "max_confidence")


def combine_weighted_diversity(frames: np.ndarray, tau: float = 2.0) -> VideoEmbedding:
    """Softmax-weighted average by distinctiveness.

    A frame's distinctiveness is the population variance of its cosine
    similarities to every other frame; frames that stand out get more
    weight. One or two frames carry no variance signal and fall back to
    uniform weights.
    """
    arr = _frames_array(frames)
    n = arr.shape[0]
    if n == 1:
        return VideoEmbedding("", arr[0].copy(), "weighted_diversity", np.ones(1))
    unit = _unit_rows(arr)
    sims = unit @ unit.T
    off_diag = sims[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    distinct = off_diag.var(axis=1)  # population variance
    weights = softmax_weights(distinct, tau)
    return VideoEmbedding("", weights @ arr, "weighted_diversity", weights)


def combine_weighted_confidence(frames: np.ndarray, confidences: np.ndarray,
                                tau: float = 2.0) -> VideoEmbedding:
    """Softmax-weighted average by classifier confidence."""
    arr = _frames_array(frames)
    conf = np.asarray(confidences, dtype=np.float64)
    if conf.shape != (arr.shape[0],):
        raise ValueError(f"need one confidence per frame, got {conf.shape} for {arr.shape[0]} frames")
    weights = softmax_weights(conf, tau)
    return VideoEmbedding("", weights @ arr, "weighted_confidence", weights)


def combine_temporal_coherence(frames: np.ndarray, radius: int = 1,
                               tau: float = 1.0) -> VideoEmbedding:
    """Softmax-weighted average by similarity to temporal neighbours.

    Each frame scores the mean cosine similarity to the other frames in a
    window of radius r around it; windows truncate at the clip boundaries.
    """
    arr = _frames_array(frames)
    n = arr.shape[0]
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if n == 1:
        return VideoEmbedding("", arr[0].copy(), "temporal_coherence", np.ones(1))
    unit = _unit_rows(arr)
    sims = unit @ unit.T
    coherence = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - radius), min(n - 1, i + radius)
        window = [j for j in range(lo, hi + 1) if j != i]
        coherence[i] = sims[i, window].mean()
    weights = softmax_weights(coherence, tau)
    return VideoEmbedding("", weights @ arr, "temporal_coherence", weights)


def combine(frames: np.ndarray, params: CombineParams,
            confidences: Optional[np.ndarray] = None,
            video_id: str = "") -> VideoEmbedding:
    """Dispatch to the configured combination method."""
    method = params.method
    if method in ("max_confidence", "weighted_confidence"):
        if confidences is None:
            raise ValueError(f"method {method!r} requires per-frame confidences")
        conf = np.asarray(confidences, dtype=np.float64)
        if not np.isfinite(conf).all():
            raise ValueError("confidences must be finite")
    if method == "average":
        result = combine_average(frames)
    elif method == "max_confidence":
        result = combine_max_confidence(frames, confidences)
    elif method == "weighted_diversity":
        result = combine_weighted_diversity(frames, params.tau)
    elif method == "weighted_confidence":
        result = combine_weighted_confidence(frames, confidences, params.tau)
    else:
        result = combine_temporal_coherence(frames, params.radius, params.tau)
    result.video_id = video_id
    return result


# ---------------------------------------------------------------------------
# video-vector files: matrix in the embeddings.bin layout plus a
# video-level manifest next to it
# ---------------------------------------------------------------------------

@dataclass
class VideoVecRecord:
    video_id: str
    posted_at: str   # ISO-8601 UTC, carried through from the store
    row: int
    method: str
    n_frames: int


def video_manifest_path(matrix_path: Path | str) -> Path:
    return Path(matrix_path).with_suffix(".manifest.jsonl")


def write_video_vectors(matrix_path: Path | str, records: list[VideoVecRecord],
                        matrix: np.ndarray) -> None:
    if len(records) != matrix.shape[0]:
        raise ValueError(f"{len(records)} records for {matrix.shape[0]} matrix rows")
    write_matrix(matrix_path, matrix)
    with open(video_manifest_path(matrix_path), "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "video_id": rec.video_id, "posted_at": rec.posted_at,
                "row": rec.row, "method": rec.method, "n_frames": rec.n_frames,
            }) + "\n")


def read_video_vectors(matrix_path: Path | str) -> tuple[list[VideoVecRecord], np.ndarray]:
    matrix = read_matrix(matrix_path)
    manifest_path = video_manifest_path(matrix_path)
    if not manifest_path.exists():
        raise ValueError(f"video manifest missing: {manifest_path}")
    records = []
    with open(manifest_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(VideoVecRecord(
                video_id=str(obj["video_id"]), posted_at=str(obj["posted_at"]),
                row=int(obj["row"]), method=str(obj["method"]),
                n_frames=int(obj["n_frames"]),
            ))
    if len(records) != matrix.shape[0]:
        raise ValueError(f"video manifest lists {len(records)} rows, matrix has {matrix.shape[0]}")
    return records, matrix
