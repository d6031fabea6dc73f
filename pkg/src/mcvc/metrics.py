"""Clustering validity metrics, the weighted composite score, and
clustering-vs-clustering comparison statistics.

Internal validity indices (silhouette, Davies-Bouldin, Calinski-Harabasz)
use Euclidean distance on L2-normalized vectors by default, which is
monotone in cosine distance and therefore consistent with how the
similarity graph is built. Degenerate single-cluster results use fixed
sentinels (silhouette -1, DB 10, CH 0) so the composite score stays
defined over the whole calibration range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DB_SENTINEL_SINGLE_CLUSTER = 10.0
CH_CAP = 1e12
MERGE_SIMILARITY_THRESHOLD = 0.9
CONCENTRATION_FLAG_THRESHOLD = 0.5


# ---------------------------------------------------------------------------
# size-distribution statistics
# ---------------------------------------------------------------------------

def gini(sizes: Sequence[int]) -> float:
    """Cluster-size inequality: sum_ij |n_i - n_j| / (2 k sum_i n_i)."""
    arr = np.asarray(sizes, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("gini requires at least one cluster size")
    if (arr < 1).any():
        raise ValueError("cluster sizes must be >= 1")
    diff_total = np.abs(arr[:, None] - arr[None, :]).sum()
    return float(diff_total / (2.0 * arr.size * arr.sum()))


def coverage_topk(sizes: Sequence[int], k: int = 10) -> float:
    """Share of items contained in the k largest clusters."""
    arr = sorted(sizes, reverse=True)
    if not arr:
        raise ValueError("coverage requires at least one cluster size")
    return float(sum(arr[:k]) / sum(arr))


def coverage_top10(sizes: Sequence[int]) -> float:
    return coverage_topk(sizes, 10)


def singleton_ratio(sizes: Sequence[int]) -> float:
    """Fraction of clusters containing exactly one item."""
    arr = list(sizes)
    if not arr:
        raise ValueError("singleton_ratio requires at least one cluster size")
    return sum(1 for s in arr if s == 1) / len(arr)


def clusters_for_coverage(sizes: Sequence[int], fraction: float = 0.8) -> int:
    """Smallest number of largest clusters whose sizes reach the given share."""
    arr = sorted(sizes, reverse=True)
    goal = fraction * sum(arr)
    acc = 0
    for i, s in enumerate(arr, start=1):
        acc += s
        if acc >= goal:
            return i
    return len(arr)


def cluster_stats(sizes: Sequence[int]) -> tuple[int, int, float, float]:
    """(cluster count, largest size, mean size, median size)."""
    arr = np.asarray(sizes, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cluster_stats requires at least one cluster size")
    return int(arr.size), int(arr.max()), float(arr.mean()), float(np.median(arr))


def sizes_from_labels(labels: np.ndarray) -> list[int]:
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    return sorted((int(c) for c in counts), reverse=True)


# ---------------------------------------------------------------------------
# internal validity indices
# ---------------------------------------------------------------------------

def _as_points(vectors: np.ndarray, normalize: bool) -> np.ndarray:
    pts = np.asarray(vectors, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("vectors must be a non-empty n x d array")
    if not normalize:
        return pts
    norms = np.linalg.norm(pts, axis=1)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise ValueError(f"row {zero[0]} has zero norm; cannot L2-normalize")
    return pts / norms[:, None]


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    sq = (points ** 2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def silhouette(vectors: np.ndarray, labels: np.ndarray, *, normalize: bool = True) -> float:
    """Mean silhouette coefficient, s(i) = (b(i) - a(i)) / max(a(i), b(i)).

    Points in singleton clusters score 0; a single-cluster labelling
    returns the degenerate sentinel -1.
    """
    points = _as_points(vectors, normalize)
    labels = np.asarray(labels)
    if labels.shape[0] != points.shape[0]:
        raise ValueError("labels and vectors disagree in length")
    uniq = np.unique(labels)
    if uniq.size == 1:
        return -1.0
    dist = _pairwise_distances(points)
    n = points.shape[0]
    scores = np.zeros(n)
    members = {lab: np.nonzero(labels == lab)[0] for lab in uniq}
    for i in range(n):
        own = members[labels[i]]
        if own.size == 1:
            continue  # singleton convention: s(i) = 0
        a = dist[i, own].sum() / (own.size - 1)
        b = min(dist[i, members[lab]].mean() for lab in uniq if lab != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def davies_bouldin(vectors: np.ndarray, labels: np.ndarray, *, normalize: bool = True) -> float:
    """Davies-Bouldin index: mean over clusters of the worst (s_i+s_j)/d_ij.

    A single cluster returns the fixed sentinel 10.0.
    """
    points = _as_points(vectors, normalize)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    k = uniq.size
    if k == 1:
        return DB_SENTINEL_SINGLE_CLUSTER
    centroids = np.stack([points[labels == lab].mean(axis=0) for lab in uniq])
    spread = np.array([
        np.linalg.norm(points[labels == lab] - centroids[idx], axis=1).mean()
        for idx, lab in enumerate(uniq)
    ])
    centroid_dist = _pairwise_distances(centroids)
    total = 0.0
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if j == i:
                continue
            d = centroid_dist[i, j]
            ratio = np.inf if d == 0 else (spread[i] + spread[j]) / d
            worst = max(worst, ratio)
        total += worst
    return float(total / k)


def calinski_harabasz(vectors: np.ndarray, labels: np.ndarray, *, normalize: bool = True) -> float:
    """Between/within variance ratio; 0 outside 2 <= k <= n-1, capped at 1e12."""
    points = _as_points(vectors, normalize)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    n, k = points.shape[0], uniq.size
    if k < 2 or k > n - 1:
        return 0.0
    grand = points.mean(axis=0)
    between = 0.0
    within = 0.0
    for lab in uniq:
        cluster = points[labels == lab]
        centroid = cluster.mean(axis=0)
        between += cluster.shape[0] * float(((centroid - grand) ** 2).sum())
        within += float(((cluster - centroid) ** 2).sum())
    if within == 0.0:
        return CH_CAP
    value = (between / (k - 1)) / (within / (n - k))
    return float(min(value, CH_CAP))


def composite_score(silhouette_mean: float, davies_bouldin_value: float,
                    calinski_harabasz_value: float, gini_value: float,
                    top10: float, singletons: float) -> float:
    """Weighted overall score in [0, 1].

    Quality metrics carry 70% (silhouette 30%, CH 20%, DB 20%, each
    normalized to [0, 1]); balance, coverage, and fragmentation carry 10%
    apiece.
    """
    s_norm = (silhouette_mean + 1.0) / 2.0
    ch_norm = min(math.log1p(calinski_harabasz_value) / 10.0, 1.0)
    db_norm = 1.0 - min(davies_bouldin_value / 5.0, 1.0)
    return (0.3 * s_norm + 0.2 * ch_norm + 0.2 * db_norm
            + 0.1 * (1.0 - gini_value) + 0.1 * top10 + 0.1 * (1.0 - singletons))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    n_clusters: int
    sizes: list[int]            # descending
    largest: int
    mean_size: float
    median_size: float
    gini: float
    top10_coverage: float
    singleton_ratio: float
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float
    overall: float

    def to_dict(self) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "sizes": self.sizes,
            "largest": self.largest,
            "mean_size": self.mean_size,
            "median_size": self.median_size,
            "gini": self.gini,
            "top10_coverage": self.top10_coverage,
            "singleton_ratio": self.singleton_ratio,
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "calinski_harabasz": self.calinski_harabasz,
            "overall": self.overall,
        }


def metrics_report(vectors: np.ndarray, labels: np.ndarray, *, normalize: bool = True) -> MetricsReport:
    """Compute the full per-clustering report."""
    labels = np.asarray(labels)
    sizes = sizes_from_labels(labels)
    k, largest, mean_size, median_size = cluster_stats(sizes)
    g = gini(sizes)
    c10 = coverage_top10(sizes)
    rs = singleton_ratio(sizes)
    s = silhouette(vectors, labels, normalize=normalize)
    db = davies_bouldin(vectors, labels, normalize=normalize)
    ch = calinski_harabasz(vectors, labels, normalize=normalize)
    return MetricsReport(
        n_clusters=k, sizes=sizes, largest=largest, mean_size=mean_size,
        median_size=median_size, gini=g, top10_coverage=c10, singleton_ratio=rs,
        silhouette=s, davies_bouldin=db, calinski_harabasz=ch,
        overall=composite_score(s, db, ch, g, c10, rs),
    )


# ---------------------------------------------------------------------------
# comparison suite
# ---------------------------------------------------------------------------

@dataclass
class TemporalReport:
    chi_square: Optional[float]          # None when the table degenerates
    concentration: dict[int, float]      # cluster -> max single-year share
    flagged: list[int]                   # clusters with share > 0.5

    def to_dict(self) -> dict:
        return {
            "chi_square": self.chi_square,
            "concentration": {str(k): v for k, v in self.concentration.items()},
            "flagged": self.flagged,
        }


def chi_square_temporal(labels: Sequence[int], years: Sequence[int]) -> TemporalReport:
    """Pearson chi-square of the cluster x year table plus concentration flags.

    The statistic is undefined (None) with fewer than two non-empty rows
    or columns; concentration flags are still reported.
    """
    labels = np.asarray(labels)
    years = np.asarray(years)
    if labels.shape[0] != years.shape[0]:
        raise ValueError("labels and years disagree in length")
    if labels.shape[0] == 0:
        raise ValueError("empty input")
    row_vals, row_idx = np.unique(labels, return_inverse=True)
    col_vals, col_idx = np.unique(years, return_inverse=True)
    table = np.zeros((row_vals.size, col_vals.size))
    np.add.at(table, (row_idx, col_idx), 1.0)

    concentration = {}
    flagged = []
    for r, lab in enumerate(row_vals):
        share = float(table[r].max() / table[r].sum())
        concentration[int(lab)] = share
        if share > CONCENTRATION_FLAG_THRESHOLD:
            flagged.append(int(lab))

    if row_vals.size < 2 or col_vals.size < 2:
        return TemporalReport(None, concentration, flagged)
    total = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
    stat = float(((table - expected) ** 2 / expected).sum())
    return TemporalReport(stat, concentration, flagged)


@dataclass
class CentroidReport:
    cluster_ids: list[int]
    matrix: np.ndarray                      # k x k cosine similarities
    merge_candidates: list[tuple[int, int, float]]  # pairs above threshold
    mean_off_diagonal: float
    max_off_diagonal: float

    def to_dict(self) -> dict:
        return {
            "cluster_ids": self.cluster_ids,
            "matrix": self.matrix.tolist(),
            "merge_candidates": [[a, b, s] for a, b, s in self.merge_candidates],
            "mean_off_diagonal": self.mean_off_diagonal,
            "max_off_diagonal": self.max_off_diagonal,
        }


def centroid_similarity(vectors: np.ndarray, labels: np.ndarray, *,
                        normalize: bool = True,
                        threshold: float = MERGE_SIMILARITY_THRESHOLD) -> CentroidReport:
    """Cosine similarities between cluster centroids; pairs above the
    threshold are potential merge candidates."""
    points = _as_points(vectors, normalize)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("centroid similarity requires at least two clusters")
    centroids = np.stack([points[labels == lab].mean(axis=0) for lab in uniq])
    norms = np.linalg.norm(centroids, axis=1)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise ValueError(f"cluster {uniq[zero[0]]} has a zero-norm centroid")
    unit = centroids / norms[:, None]
    sims = unit @ unit.T
    upper = np.triu(sims, k=1)
    sims = upper + upper.T
    np.fill_diagonal(sims, 1.0)

    candidates = []
    off = []
    k = uniq.size
    for i in range(k):
        for j in range(i + 1, k):
            off.append(sims[i, j])
            if sims[i, j] > threshold:
                candidates.append((int(uniq[i]), int(uniq[j]), float(sims[i, j])))
    return CentroidReport(
        cluster_ids=[int(u) for u in uniq],
        matrix=sims,
        merge_candidates=candidates,
        mean_off_diagonal=float(np.mean(off)),
        max_off_diagonal=float(np.max(off)),
    )


def _contingency(labels_a: np.ndarray, labels_b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a_vals, a_idx = np.unique(labels_a, return_inverse=True)
    b_vals, b_idx = np.unique(labels_b, return_inverse=True)
    table = np.zeros((a_vals.size, b_vals.size))
    np.add.at(table, (a_idx, b_idx), 1.0)
    return table, a_vals, b_vals


def variation_of_information(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    """VI = H(A) + H(B) - 2 I(A;B) with natural-log entropies.

    Computed cell-wise as sum p_ij * (ln(p_i/p_ij) + ln(p_j/p_ij)), which
    is nonnegative term by term and exactly 0 for identical partitions.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape[0] != b.shape[0]:
        raise ValueError("clusterings disagree in length")
    if a.shape[0] == 0:
        raise ValueError("empty clusterings")
    table, _, _ = _contingency(a, b)
    n = table.sum()
    p = table / n
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    i_idx, j_idx = np.nonzero(p)
    cells = p[i_idx, j_idx]
    vi = float(np.sum(cells * (np.log(pa[i_idx] / cells) + np.log(pb[j_idx] / cells))))
    return vi


def overlap_matrix(labels_a: Sequence[int], labels_b: Sequence[int]) -> tuple[np.ndarray, list[int], list[int]]:
    """Row-normalized overlap percentages.

    Entry (i, j) is the share of A-cluster i's members that land in
    B-cluster j, in percent; every row sums to 100.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape[0] != b.shape[0]:
        raise ValueError("clusterings disagree in length")
    if a.shape[0] == 0:
        raise ValueError("empty clusterings")
    table, a_vals, b_vals = _contingency(a, b)
    percent = table / table.sum(axis=1, keepdims=True) * 100.0
    return percent, [int(v) for v in a_vals], [int(v) for v in b_vals]
