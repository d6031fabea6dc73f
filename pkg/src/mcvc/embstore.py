"""Portable on-disk embedding store: manifest + matrix.

Layout of a store directory:
    manifest.jsonl   one video entry per line (frame metadata, timestamps)
    embeddings.bin   magic "MCVC", u32 version=1, u32 rows, u32 dim,
                     then rows*dim little-endian float32, row-major

The matrix holds one row per frame; each frame record points into it via
``embedding_row``. Everything is value-like: stores can be freely shared
between threads once loaded.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"MCVC"
VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
MATRIX_NAME = "embeddings.bin"
LUMA_BYTES = 64  # 8x8 grayscale thumbnail


class StoreError(ValueError):
    """Raised when store files are missing, corrupt, or violate invariants."""


@dataclass
class FrameRecord:
    """Per-frame metadata plus a pointer into the embedding matrix."""

    index: int                  # frame position in the source video
    timestamp_s: float
    embedding_row: int
    gray_std: float             # grayscale standard deviation, [0, 255] units
    brightness: float           # mean luma, [0, 255]
    confidence: Optional[float]  # max classifier softmax; None without a head
    luma8x8: bytes              # 64 bytes, row-major 8x8 luma thumbnail


@dataclass
class VideoEntry:
    video_id: str
    posted_at: datetime         # timezone-aware UTC
    duration_s: float
    frame_count_total: int      # total frames in the source video
    frames: list[FrameRecord] = field(default_factory=list)


@dataclass
class EmbeddingStore:
    manifest: list[VideoEntry]
    dim: int
    matrix: np.ndarray          # rows x dim, float32
    backbone_tag: str = ""

    @property
    def rows(self) -> int:
        return int(self.matrix.shape[0])

    def total_frames(self) -> int:
        return sum(len(v.frames) for v in self.manifest)


@dataclass
class Violation:
    """One invariant violation found by validate_store."""

    code: str
    message: str
    video_id: Optional[str] = None
    frame_index: Optional[int] = None

    def __str__(self) -> str:
        where = ""
        if self.video_id is not None:
            where = f" [video={self.video_id}"
            if self.frame_index is not None:
                where += f", frame={self.frame_index}"
            where += "]"
        return f"{self.code}: {self.message}{where}"


def validate_store(store: EmbeddingStore) -> list[Violation]:
    """Check every store invariant; returns an empty list iff the store is valid.

    Report-only: never raises. Each violation names the offending video
    and frame where applicable.
    """
    out: list[Violation] = []
    rows = store.rows

    if store.dim <= 0:
        out.append(Violation("bad_dim", f"dim must be positive, got {store.dim}"))
    if store.matrix.ndim != 2 or store.matrix.shape[1] != store.dim:
        out.append(Violation(
            "matrix_shape",
            f"matrix shape {store.matrix.shape} does not match dim {store.dim}",
        ))
    if store.matrix.size and not np.isfinite(store.matrix).all():
        bad = int(np.argwhere(~np.isfinite(store.matrix))[0][0])
        out.append(Violation("non_finite", f"matrix contains non-finite values (first bad row {bad})"))

    total = store.total_frames()
    if total != rows:
        out.append(Violation(
            "row_count",
            f"manifest references {total} frames but matrix has {rows} rows",
        ))

    seen_rows: dict[int, tuple[str, int]] = {}
    for video in store.manifest:
        if video.duration_s <= 0:
            out.append(Violation("bad_duration", f"duration_s={video.duration_s} (must be > 0)",
                                 video.video_id))
        if video.frame_count_total < len(video.frames):
            out.append(Violation(
                "frame_count",
                f"frame_count_total={video.frame_count_total} < stored frames {len(video.frames)}",
                video.video_id,
            ))
        if video.posted_at.tzinfo is None:
            out.append(Violation("naive_timestamp", "posted_at must be timezone-aware",
                                 video.video_id))
        prev_index = None
        for rec in video.frames:
            if prev_index is not None and rec.index <= prev_index:
                out.append(Violation("frame_order", f"frame index {rec.index} not strictly increasing",
                                     video.video_id, rec.index))
            prev_index = rec.index
            if not (0 <= rec.embedding_row < rows):
                out.append(Violation("row_bounds", f"embedding_row {rec.embedding_row} outside [0, {rows})",
                                     video.video_id, rec.index))
            elif rec.embedding_row in seen_rows:
                other_vid, other_idx = seen_rows[rec.embedding_row]
                out.append(Violation(
                    "row_duplicate",
                    f"embedding_row {rec.embedding_row} already used by video={other_vid} frame={other_idx}",
                    video.video_id, rec.index,
                ))
            else:
                seen_rows[rec.embedding_row] = (video.video_id, rec.index)
            if rec.gray_std < 0:
                out.append(Violation("gray_std_range", f"gray_std={rec.gray_std} (must be >= 0)",
                                     video.video_id, rec.index))
            if not (0.0 <= rec.brightness <= 255.0):
                out.append(Violation("brightness_range", f"brightness={rec.brightness} outside [0, 255]",
                                     video.video_id, rec.index))
            if rec.confidence is not None and not (0.0 <= rec.confidence <= 1.0):
                out.append(Violation("confidence_range", f"confidence={rec.confidence} outside [0, 1]",
                                     video.video_id, rec.index))
            if len(rec.luma8x8) != LUMA_BYTES:
                out.append(Violation("luma_size", f"luma8x8 has {len(rec.luma8x8)} bytes, expected {LUMA_BYTES}",
                                     video.video_id, rec.index))
    return out


def _frame_to_json(rec: FrameRecord) -> dict:
    return {
        "index": rec.index,
        "timestamp_s": rec.timestamp_s,
        "embedding_row": rec.embedding_row,
        "gray_std": rec.gray_std,
        "brightness": rec.brightness,
        "confidence": rec.confidence,
        "luma8x8": base64.b64encode(rec.luma8x8).decode("ascii"),
    }


def _frame_from_json(obj: dict) -> FrameRecord:
    return FrameRecord(
        index=int(obj["index"]),
        timestamp_s=float(obj["timestamp_s"]),
        embedding_row=int(obj["embedding_row"]),
        gray_std=float(obj["gray_std"]),
        brightness=float(obj["brightness"]),
        confidence=None if obj["confidence"] is None else float(obj["confidence"]),
        luma8x8=base64.b64decode(obj["luma8x8"]),
    )


def _parse_timestamp(value: str) -> datetime:
    # fromisoformat on 3.10 does not accept a trailing "Z"
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        raise StoreError(f"posted_at {value!r} is not timezone-aware")
    return ts.astimezone(timezone.utc)


def write_store(store: EmbeddingStore, directory: Path | str) -> None:
    """Write manifest.jsonl and embeddings.bin into ``directory``.

    The store is validated first; any invariant violation aborts before
    a single byte is written.
    """
    violations = validate_store(store)
    if violations:
        summary = "; ".join(str(v) for v in violations[:5])
        raise StoreError(f"refusing to write invalid store ({len(violations)} violations): {summary}")

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        for video in store.manifest:
            obj = {
                "video_id": video.video_id,
                "posted_at": video.posted_at.astimezone(timezone.utc).isoformat(),
                "duration_s": video.duration_s,
                "frame_count_total": video.frame_count_total,
                "frames": [_frame_to_json(rec) for rec in video.frames],
            }
            fh.write(json.dumps(obj) + "\n")

    matrix = np.ascontiguousarray(store.matrix, dtype="<f4")
    with open(directory / MATRIX_NAME, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, matrix.shape[0], store.dim))
        fh.write(matrix.tobytes())


def read_matrix(path: Path | str) -> np.ndarray:
    """Read a bare MCVC matrix file, checking magic, version, and shape."""
    path = Path(path)
    if not path.exists():
        raise StoreError(f"matrix file missing: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise StoreError(f"bad magic in {path}: {magic!r} (expected {MAGIC!r})")
        header = fh.read(12)
        if len(header) != 12:
            raise StoreError(f"truncated header in {path}")
        version, rows, dim = struct.unpack("<III", header)
        if version != VERSION:
            raise StoreError(f"unsupported version {version} in {path} (expected {VERSION})")
        if dim == 0:
            raise StoreError(f"dim must be positive in {path}")
        data = fh.read()
    expected = rows * dim * 4
    if len(data) != expected:
        raise StoreError(f"matrix payload is {len(data)} bytes, expected {expected} ({rows}x{dim} f32)")
    return np.frombuffer(data, dtype="<f4").reshape(rows, dim).copy()


def write_matrix(path: Path | str, matrix: np.ndarray) -> None:
    """Write a bare MCVC matrix file (same binary layout as embeddings.bin)."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise StoreError(f"matrix must be 2-D, got shape {matrix.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.tobytes())


def read_store(directory: Path | str, backbone_tag: str = "") -> EmbeddingStore:
    """Load a store directory, failing loudly on any format mismatch."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise StoreError(f"manifest file missing: {manifest_path}")

    manifest: list[VideoEntry] = []
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreError(f"{manifest_path}:{lineno}: invalid JSON: {exc}") from exc
            manifest.append(VideoEntry(
                video_id=str(obj["video_id"]),
                posted_at=_parse_timestamp(obj["posted_at"]),
                duration_s=float(obj["duration_s"]),
                frame_count_total=int(obj["frame_count_total"]),
                frames=[_frame_from_json(f) for f in obj["frames"]],
            ))

    matrix = read_matrix(directory / MATRIX_NAME)
    store = EmbeddingStore(manifest=manifest, dim=matrix.shape[1], matrix=matrix,
                           backbone_tag=backbone_tag)

    total = store.total_frames()
    if total != store.rows:
        raise StoreError(f"manifest references {total} frames but matrix has {store.rows} rows")
    for video in manifest:
        for rec in video.frames:
            if not (0 <= rec.embedding_row < store.rows):
                raise StoreError(
                    f"video {video.video_id} frame {rec.index}: embedding_row "
                    f"{rec.embedding_row} outside [0, {store.rows})"
                )
    if store.matrix.size and not np.isfinite(store.matrix).all():
        raise StoreError("matrix contains non-finite values")
    return store


def stores_equal(a: EmbeddingStore, b: EmbeddingStore) -> bool:
    """Field-equal manifests and bit-exact matrices."""
    if a.dim != b.dim or a.rows != b.rows:
        return False
    if a.matrix.tobytes() != b.matrix.tobytes():
        return False
    if len(a.manifest) != len(b.manifest):
        return False
    for va, vb in zip(a.manifest, b.manifest):
        if (va.video_id, va.posted_at, va.duration_s, va.frame_count_total) != \
           (vb.video_id, vb.posted_at, vb.duration_s, vb.frame_count_total):
            return False
        if va.frames != vb.frames:
            return False
    return True
