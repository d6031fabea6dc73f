"""Complete cosine-similarity graph over video embeddings and signed costs.

Similarities live in [-1, 1]; the calibration term shifts them into signed
multicut edge costs, w_e = s_e - (1 - cal). Positive costs attract (the
solver prefers to join the endpoints), negative costs repel. Raising cal
makes every edge more attractive, so high cal merges everything and low
cal shatters the graph.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

GRAPH_MAGIC = b"MCGW"


@dataclass
class CostGraph:
    """Complete weighted graph as a dense symmetric cost matrix (zero diagonal)."""

    n: int
    costs: np.ndarray             # n x n, symmetric, costs[i, i] = 0
    cal: Optional[float] = None   # calibration used to build it, if known

    def cost(self, u: int, v: int) -> float:
        return float(self.costs[u, v])

    def condensed(self) -> np.ndarray:
        """Upper-triangular costs in row-major pair order."""
        iu, ju = np.triu_indices(self.n, k=1)
        return self.costs[iu, ju]


def cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities; symmetric with a unit diagonal.

    Each unordered pair is computed once and mirrored, so symmetry is
    exact rather than up to BLAS rounding.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ValueError("vectors must be a non-empty n x d array")
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise ValueError(f"row {zero[0]} has zero norm; cosine similarity undefined")
    unit = vectors / norms[:, None]
    sims = unit @ unit.T
    upper = np.triu(sims, k=1)
    sims = upper + upper.T
    np.fill_diagonal(sims, 1.0)
    return sims


def calibrate(similarities: np.ndarray, cal: float) -> CostGraph:
    """Shift similarities into signed edge costs: w_e = s_e - (1 - cal)."""
    if not (0.0 < cal < 1.0):
        raise ValueError(f"cal must lie strictly inside (0, 1), got {cal}")
    sims = np.asarray(similarities, dtype=np.float64)
    if sims.ndim != 2 or sims.shape[0] != sims.shape[1]:
        raise ValueError(f"similarity matrix must be square, got shape {sims.shape}")
    costs = sims - (1.0 - cal)
    np.fill_diagonal(costs, 0.0)
    return CostGraph(n=sims.shape[0], costs=costs, cal=cal)


def build_cost_graph(vectors: np.ndarray, cal: float) -> CostGraph:
    return calibrate(cosine_matrix(vectors), cal)


def write_graph(path: Path | str, graph: CostGraph) -> None:
    """Binary graph file: magic "MCGW", u32 n, n(n-1)/2 little-endian f32 costs."""
    condensed = np.ascontiguousarray(graph.condensed(), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(GRAPH_MAGIC)
        fh.write(struct.pack("<I", graph.n))
        fh.write(condensed.tobytes())


def read_graph(path: Path | str) -> CostGraph:
    path = Path(path)
    if not path.exists():
        raise ValueError(f"graph file missing: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != GRAPH_MAGIC:
            raise ValueError(f"bad magic in {path}: {magic!r} (expected {GRAPH_MAGIC!r})")
        header = fh.read(4)
        if len(header) != 4:
            raise ValueError(f"truncated header in {path}")
        (n,) = struct.unpack("<I", header)
        data = fh.read()
    n_edges = n * (n - 1) // 2
    if len(data) != 4 * n_edges:
        raise ValueError(f"graph payload is {len(data)} bytes, expected {4 * n_edges} for n={n}")
    condensed = np.frombuffer(data, dtype="<f4").astype(np.float64)
    costs = np.zeros((n, n))
    iu, ju = np.triu_indices(n, k=1)
    costs[iu, ju] = condensed
    costs[ju, iu] = condensed
    return CostGraph(n=n, costs=costs)
