"""Minimum-cost multicut solvers on complete signed graphs.

Solutions are node partitions, which makes every cut cycle-consistent by
construction; the objective is the summed cost of edges whose endpoints
land in different clusters. Heuristic pipeline: greedy additive edge
contraction (GAEC) followed by Kernighan-Lin-style local search with
joins. An exhaustive enumeration oracle covers small instances.

All solvers are deterministic: ties break toward the smallest cluster
ids and the scan orders are fixed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .simgraph import CostGraph

# strictly-improving threshold; guards the local search against
# floating-point noise cycles
_EPS = 1e-12

MAX_BRUTE_FORCE_NODES = 10  # Bell(10) = 115,975 partitions


@dataclass
class Clustering:
    """Partition of nodes 0..n-1 as per-node cluster labels."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_clusters(self) -> int:
        return int(np.unique(self.labels).size)

    def sizes(self) -> list[int]:
        """Cluster sizes, largest first."""
        _, counts = np.unique(self.labels, return_counts=True)
        return sorted((int(c) for c in counts), reverse=True)

    def canonical(self) -> "Clustering":
        """Relabel clusters by first appearance: node 0's cluster is 0, etc."""
        return Clustering(canonical_labels(self.labels))


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    mapping: dict[int, int] = {}
    out = np.empty(labels.shape[0], dtype=np.int64)
    for i, lab in enumerate(labels.tolist()):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


@dataclass
class SolveResult:
    clustering: Clustering
    objective: float
    solver: str      # "gaec" | "gaec+klj" | "exact"
    iterations: int


def objective(graph: CostGraph, clustering: Clustering) -> float:
    """Total cost of cut edges: sum of w_e over pairs in different clusters."""
    labels = clustering.labels
    if labels.shape[0] != graph.n:
        raise ValueError(f"clustering covers {labels.shape[0]} nodes, graph has {graph.n}")
    total = graph.costs.sum() / 2.0
    intra = 0.0
    for lab in np.unique(labels):
        idx = np.nonzero(labels == lab)[0]
        if idx.size > 1:
            intra += graph.costs[np.ix_(idx, idx)].sum() / 2.0
    return float(total - intra)


def gaec(graph: CostGraph) -> SolveResult:
    """Greedy additive edge contraction.

    Starting from singletons, repeatedly merge the cluster pair with the
    largest positive summed inter-cluster cost (parallel edges add up on
    contraction) until no positive pair remains. Ties pop the smallest
    (first id, second id) pair; a merged cluster keeps the smaller id.
    """
    n = graph.n
    if not np.isfinite(graph.costs).all():
        raise ValueError("edge costs must be finite")
    merged = graph.costs.copy()
    active = np.ones(n, dtype=bool)
    version = np.zeros(n, dtype=np.int64)
    parent = np.arange(n)

    heap = [(-merged[i, j], i, j, 0, 0)
            for i in range(n) for j in range(i + 1, n) if merged[i, j] > 0]
    heapq.heapify(heap)

    contractions = 0
    while heap:
        neg_cost, a, b, va, vb = heapq.heappop(heap)
        if -neg_cost <= 0:
            break
        if not (active[a] and active[b]) or version[a] != va or version[b] != vb:
            continue
        # contract b into a (a < b by construction)
        merged[a, :] += merged[b, :]
        merged[:, a] += merged[:, b]
        merged[a, a] = 0.0
        active[b] = False
        parent[b] = a
        version[a] += 1
        contractions += 1
        for c in np.nonzero(active)[0]:
            if c == a:
                continue
            cost = merged[a, c]
            if cost > 0:
                lo, hi = (a, c) if a < c else (c, a)
                heapq.heappush(heap, (-cost, lo, hi, int(version[lo]), int(version[hi])))

    # resolve the contraction forest to final labels
    def root(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    labels = np.array([root(i) for i in range(n)], dtype=np.int64)
    clustering = Clustering(canonical_labels(labels))
    return SolveResult(clustering, objective(graph, clustering), "gaec", contractions)


class _Partition:
    """Mutable partition with per-node-to-cluster cost sums for local search."""

    def __init__(self, graph: CostGraph, labels: np.ndarray):
        self.W = graph.costs
        self.n = graph.n
        self.labels = canonical_labels(labels).copy()
        k = int(self.labels.max()) + 1 if self.n else 0
        # node_cost[v, c] = total cost between v and the members of cluster c
        self.node_cost = np.zeros((self.n, max(k, 1) + 8))
        self.sizes = np.zeros(self.node_cost.shape[1], dtype=np.int64)
        self.width = k
        for c in range(k):
            members = np.nonzero(self.labels == c)[0]
            self.sizes[c] = members.size
            self.node_cost[:, c] = self.W[:, members].sum(axis=1)

    def _grow(self) -> None:
        extra = np.zeros((self.n, self.node_cost.shape[1] + 8))
        extra[:, :self.node_cost.shape[1]] = self.node_cost
        self.node_cost = extra
        sizes = np.zeros(extra.shape[1], dtype=np.int64)
        sizes[:self.sizes.shape[0]] = self.sizes
        self.sizes = sizes

    def new_cluster_slot(self) -> int:
        for c in range(self.width):
            if self.sizes[c] == 0:
                return c
        if self.width == self.node_cost.shape[1]:
            self._grow()
        self.width += 1
        return self.width - 1

    def move(self, v: int, target: int) -> None:
        src = self.labels[v]
        self.labels[v] = target
        self.sizes[src] -= 1
        self.sizes[target] += 1
        self.node_cost[:, src] -= self.W[:, v]
        self.node_cost[:, target] += self.W[:, v]
        if self.sizes[src] == 0:
            self.node_cost[:, src] = 0.0  # clear fp residue before slot reuse

    def join(self, keep: int, absorb: int) -> None:
        members = np.nonzero(self.labels == absorb)[0]
        self.labels[members] = keep
        self.sizes[keep] += self.sizes[absorb]
        self.sizes[absorb] = 0
        self.node_cost[:, keep] += self.node_cost[:, absorb]
        self.node_cost[:, absorb] = 0.0


def klj_refine(graph: CostGraph, start: Clustering) -> SolveResult:
    """Local search over node moves, node extractions, and cluster joins.

    Each pass scans nodes in ascending order trying (a) moving the node
    to another cluster and (b) splitting it into a new singleton, then
    scans cluster pairs in ascending order trying (c) joins. Strictly
    improving moves apply immediately; passes repeat until one finds no
    improvement. The objective never increases.
    """
    if start.labels.shape[0] != graph.n:
        raise ValueError(f"clustering covers {start.labels.shape[0]} nodes, graph has {graph.n}")
    part = _Partition(graph, start.labels)
    passes = 0
    improved = True
    while improved:
        improved = False
        passes += 1
        for v in range(part.n):
            src = part.labels[v]
            attach = part.node_cost[v, src]  # cost cut if v leaves its cluster
            moved = False
            for target in range(part.width):
                if target == src or part.sizes[target] == 0:
                    continue
                if part.node_cost[v, target] > attach + _EPS:
                    part.move(v, target)
                    improved = moved = True
                    break
            if not moved and part.sizes[src] > 1 and attach < -_EPS:
                part.move(v, part.new_cluster_slot())
                improved = True
        for c1 in range(part.width):
            if part.sizes[c1] == 0:
                continue
            for c2 in range(c1 + 1, part.width):
                if part.sizes[c2] == 0:
                    continue
                members = np.nonzero(part.labels == c1)[0]
                between = part.node_cost[members, c2].sum()
                if between > _EPS:
                    part.join(c1, c2)
                    improved = True
    clustering = Clustering(canonical_labels(part.labels))
    return SolveResult(clustering, objective(graph, clustering), "gaec+klj", passes)


def brute_force(graph: CostGraph) -> SolveResult:
    """Exact minimum by enumerating every set partition (n <= 10).

    Partitions are generated as restricted-growth strings in
    lexicographic order, so objective ties keep the canonically smallest
    labelling.
    """
    n = graph.n
    if n > MAX_BRUTE_FORCE_NODES:
        raise ValueError(f"brute force is limited to n <= {MAX_BRUTE_FORCE_NODES}, got {n}")
    if n == 0:
        raise ValueError("graph has no nodes")
    W = graph.costs
    labels = np.zeros(n, dtype=np.int64)
    best_obj = np.inf
    best_labels = labels.copy()
    count = 0

    def recurse(i: int, k: int, cut: float) -> None:
        nonlocal best_obj, best_labels, count
        if i == n:
            count += 1
            if cut < best_obj:
                best_obj = cut
                best_labels = labels.copy()
            return
        row = W[i, :i]
        total = row.sum()
        cluster_sums = np.zeros(k)
        np.add.at(cluster_sums, labels[:i], row)
        for c in range(k + 1):
            added = total - cluster_sums[c] if c < k else total
            labels[i] = c
            recurse(i + 1, max(k, c + 1), cut + added)

    recurse(0, 0, 0.0)
    clustering = Clustering(best_labels)
    return SolveResult(clustering, objective(graph, clustering), "exact", count)


def solve(graph: CostGraph) -> SolveResult:
    """GAEC followed by KL-with-joins refinement."""
    initial = gaec(graph)
    refined = klj_refine(graph, initial.clustering)
    return SolveResult(refined.clustering, refined.objective, "gaec+klj",
                       initial.iterations + refined.iterations)
