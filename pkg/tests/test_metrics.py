"""Validity metrics against hand values, golden ablation rows, and sklearn oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import (
    calinski_harabasz_score,
    davies_bouldin_score,
    silhouette_score,
)

from mcvc.metrics import (
    CH_CAP,
    calinski_harabasz,
    centroid_similarity,
    chi_square_temporal,
    cluster_stats,
    clusters_for_coverage,
    composite_score,
    coverage_top10,
    coverage_topk,
    davies_bouldin,
    gini,
    metrics_report,
    overlap_matrix,
    silhouette,
    singleton_ratio,
    variation_of_information,
)

TABLE_SIZES = [2968, 1, 1]  # ablation row with one dominating cluster


class TestSizeStats:
    def test_gini_equal_sizes_zero(self):
        assert gini([5, 5, 5, 5]) == 0.0

    def test_gini_single_cluster_zero(self):
        assert gini([2970]) == 0.0

    def test_gini_table_row(self):
        assert gini(TABLE_SIZES) == pytest.approx(0.666, abs=1e-3)

    def test_gini_scale_and_permutation_invariant(self):
        sizes = [7, 1, 4, 4]
        assert gini(sizes) == pytest.approx(gini([4, 7, 4, 1]))
        assert gini(sizes) == pytest.approx(gini([s * 10 for s in sizes]))

    def test_coverage_all_when_few_clusters(self):
        assert coverage_top10([3, 2, 1]) == 1.0
        assert coverage_top10(TABLE_SIZES) == 1.0

    def test_coverage_half(self):
        assert coverage_top10([50] * 20) == 0.5

    def test_singleton_ratio_extremes(self):
        assert singleton_ratio([4, 5]) == 0.0
        assert singleton_ratio([1, 1, 1]) == 1.0
        assert singleton_ratio(TABLE_SIZES) == pytest.approx(2 / 3)

    def test_cluster_stats_table_row(self):
        k, largest, mean, median = cluster_stats(TABLE_SIZES)
        assert (k, largest) == (3, 2968)
        assert mean == pytest.approx(990.0)
        assert median == 1.0

    def test_cluster_stats_single_cluster(self):
        k, largest, mean, median = cluster_stats([2970])
        assert (k, largest, mean, median) == (1, 2970, 2970.0, 2970.0)

    def test_median_even_count(self):
        assert cluster_stats([1, 2, 3, 4])[3] == 2.5

    def test_clusters_for_coverage(self):
        assert clusters_for_coverage([8, 1, 1], 0.8) == 1
        assert clusters_for_coverage([1] * 10, 0.8) == 8

    @given(st.lists(st.integers(1, 500), min_size=1, max_size=40))
    def test_gini_bounds_and_zero_iff_equal(self, sizes):
        g = gini(sizes)
        assert 0.0 <= g < 1.0
        if len(set(sizes)) == 1:
            assert g == 0.0
        elif len(set(sizes)) > 1:
            assert g > 0.0


def two_far_pairs():
    points = np.array([[0.0, 0.0], [0.1, 0.0], [10.1, 0.0], [10.2, 0.0]])
    labels = np.array([0, 0, 1, 1])
    return points, labels


class TestSilhouette:
    def test_two_tight_far_pairs(self):
        points, labels = two_far_pairs()
        ours = silhouette(points, labels, normalize=False)
        assert ours == pytest.approx(silhouette_score(points, labels), abs=1e-12)
        assert ours > 0.98

    def test_all_singletons_zero(self):
        points = np.eye(4)
        assert silhouette(points, np.arange(4)) == 0.0

    def test_single_cluster_sentinel(self):
        points = np.eye(3)
        assert silhouette(points, np.zeros(3)) == -1.0

    @given(st.integers(0, 500))
    @settings(max_examples=25)
    def test_matches_sklearn_on_random_data(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.standard_normal((20, 3))
        labels = rng.integers(0, 4, size=20)
        if np.unique(labels).size < 2:
            return
        ours = silhouette(points, labels, normalize=False)
        ref = silhouette_score(points, labels)
        assert ours == pytest.approx(ref, rel=1e-6, abs=1e-9)

    def test_range_and_rotation_invariance(self):
        rng = np.random.default_rng(9)
        points = rng.standard_normal((15, 3))
        labels = rng.integers(0, 3, size=15)
        base = silhouette(points, labels)
        assert -1.0 <= base <= 1.0
        # a rotation preserves norms and distances
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        rotated = silhouette(points @ q, labels)
        assert rotated == pytest.approx(base, abs=1e-9)


class TestDaviesBouldin:
    def test_two_point_clusters_zero(self):
        points = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 0.0], [5.0, 0.0]])
        assert davies_bouldin(points, np.array([0, 0, 1, 1]), normalize=False) == 0.0

    def test_single_cluster_sentinel(self):
        assert davies_bouldin(np.eye(3), np.zeros(3)) == 10.0

    def test_hand_computed_one_dimensional(self):
        points = np.array([[0.0], [1.0], [10.0], [11.0]])
        labels = np.array([0, 0, 1, 1])
        assert davies_bouldin(points, labels, normalize=False) == pytest.approx(0.1)

    @given(st.integers(0, 500))
    @settings(max_examples=25)
    def test_matches_sklearn_on_random_data(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.standard_normal((20, 3))
        labels = rng.integers(0, 4, size=20)
        if np.unique(labels).size < 2:
            return
        ours = davies_bouldin(points, labels, normalize=False)
        assert ours == pytest.approx(davies_bouldin_score(points, labels), rel=1e-6, abs=1e-9)


class TestCalinskiHarabasz:
    def test_single_cluster_sentinel(self):
        assert calinski_harabasz(np.eye(3), np.zeros(3)) == 0.0

    def test_all_singletons_sentinel(self):
        assert calinski_harabasz(np.eye(3), np.arange(3)) == 0.0

    def test_zero_within_spread_capped(self):
        points = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 0.0], [5.0, 0.0]])
        assert calinski_harabasz(points, np.array([0, 0, 1, 1]), normalize=False) == CH_CAP

    def test_hand_computed_one_dimensional(self):
        points = np.array([[0.0], [1.0], [10.0], [11.0]])
        labels = np.array([0, 0, 1, 1])
        # B = 2*25 + 2*25 = 100, W = 1, (100/1) / (1/2) = 200
        ours = calinski_harabasz(points, labels, normalize=False)
        assert ours == pytest.approx(200.0)
        assert ours == pytest.approx(calinski_harabasz_score(points, labels), abs=1e-9)

    @given(st.integers(0, 500))
    @settings(max_examples=25)
    def test_matches_sklearn_on_random_data(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.standard_normal((20, 3))
        labels = rng.integers(0, 4, size=20)
        if np.unique(labels).size < 2:
            return
        ours = calinski_harabasz(points, labels, normalize=False)
        assert ours == pytest.approx(calinski_harabasz_score(points, labels), rel=1e-6)


class TestCompositeScore:
    def test_degenerate_single_cluster_row(self):
        assert composite_score(-1.0, 10.0, 0.0, 0.0, 1.0, 0.0) == pytest.approx(0.300, abs=1e-3)

    def test_dominant_cluster_row(self):
        assert composite_score(-1.0, 10.0, 0.0, 0.666, 1.0, 0.6667) == pytest.approx(0.167, abs=1e-3)

    def test_mid_calibration_row(self):
        assert composite_score(0.081, 2.096, 25.30, 0.923, 0.9707, 0.2955) == pytest.approx(0.519, abs=1e-3)

    def test_other_backbone_row(self):
        assert composite_score(-0.022, 2.495, 8.151, 0.882, 0.8865, 0.1392) == pytest.approx(0.478, abs=1e-3)

    def test_monotone_directions(self):
        base = composite_score(0.1, 2.0, 10.0, 0.5, 0.8, 0.2)
        assert composite_score(0.2, 2.0, 10.0, 0.5, 0.8, 0.2) > base      # silhouette up
        assert composite_score(0.1, 2.0, 20.0, 0.5, 0.8, 0.2) > base      # CH up
        assert composite_score(0.1, 3.0, 10.0, 0.5, 0.8, 0.2) < base      # DB up
        assert composite_score(0.1, 2.0, 10.0, 0.7, 0.8, 0.2) < base      # gini up
        assert composite_score(0.1, 2.0, 10.0, 0.5, 0.9, 0.2) > base      # coverage up
        assert composite_score(0.1, 2.0, 10.0, 0.5, 0.8, 0.4) < base      # singletons up

    def test_range(self):
        assert 0.0 <= composite_score(-1.0, 100.0, 0.0, 0.99, 0.01, 1.0) <= 1.0
        assert 0.0 <= composite_score(1.0, 0.0, 1e9, 0.0, 1.0, 0.0) <= 1.0


class TestChiSquare:
    def test_proportional_table_is_zero(self):
        # both clusters split 2:1 over years, matching the marginal
        labels = [0] * 6 + [1] * 3
        years = [2019, 2019, 2019, 2019, 2020, 2020, 2019, 2019, 2020]
        report = chi_square_temporal(labels, years)
        assert report.chi_square == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_two_by_two(self):
        labels = [0] * 10 + [1] * 10
        years = [2019] * 10 + [2020] * 10
        report = chi_square_temporal(labels, years)
        assert report.chi_square == pytest.approx(20.0)
        assert report.flagged == [0, 1]  # each cluster is single-year

    def test_concentration_flags(self):
        labels = [0] * 10
        years = [2019] * 6 + [2020] * 4
        report = chi_square_temporal(labels, years)
        assert report.chi_square is None  # single row: statistic undefined
        assert report.concentration[0] == pytest.approx(0.6)
        assert report.flagged == [0]

    def test_even_split_not_flagged(self):
        labels = [0] * 10
        years = [2019] * 5 + [2020] * 5
        assert chi_square_temporal(labels, years).flagged == []

    def test_matches_scipy_free_reference(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 3, 60)
        years = rng.integers(2019, 2023, 60)
        report = chi_square_temporal(labels, years)
        # independent dense-table recomputation
        rows = np.unique(labels)
        cols = np.unique(years)
        table = np.array([[np.sum((labels == r) & (years == c)) for c in cols] for r in rows],
                         dtype=float)
        expected = table.sum(axis=1)[:, None] * table.sum(axis=0)[None, :] / table.sum()
        stat = ((table - expected) ** 2 / expected).sum()
        assert report.chi_square == pytest.approx(stat, abs=1e-9)


class TestCentroidSimilarity:
    def test_identical_centroids_flagged(self):
        points = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        report = centroid_similarity(points, np.array([0, 0, 1, 1]))
        assert report.matrix[0, 1] == pytest.approx(1.0)
        assert report.merge_candidates == [(0, 1, pytest.approx(1.0))]

    def test_orthogonal_centroids_not_flagged(self):
        points = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        report = centroid_similarity(points, np.array([0, 0, 1, 1]))
        assert report.matrix[0, 1] == pytest.approx(0.0)
        assert report.merge_candidates == []
        assert report.max_off_diagonal == pytest.approx(0.0)

    def test_known_angle_above_threshold(self):
        angle = math.radians(15)  # cos ~ 0.966 > 0.9
        points = np.array([[1.0, 0.0], [math.cos(angle), math.sin(angle)]])
        report = centroid_similarity(points, np.array([0, 1]))
        assert len(report.merge_candidates) == 1
        assert report.merge_candidates[0][2] == pytest.approx(math.cos(angle))

    def test_requires_two_clusters(self):
        with pytest.raises(ValueError):
            centroid_similarity(np.eye(3), np.zeros(3))


class TestVariationOfInformation:
    def test_identical_clusterings_zero(self):
        labels = np.array([0, 1, 1, 2, 0])
        assert variation_of_information(labels, labels) == 0.0
        relabeled = np.array([5, 9, 9, 2, 5])
        assert variation_of_information(labels, relabeled) == pytest.approx(0.0, abs=1e-12)

    def test_one_cluster_vs_singletons(self):
        n = 4
        vi = variation_of_information(np.zeros(n), np.arange(n))
        assert vi == pytest.approx(math.log(n), abs=1e-9)

    @given(st.integers(0, 300))
    @settings(max_examples=30)
    def test_symmetry_and_bounds(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 4, 24)
        b = rng.integers(0, 5, 24)
        vi_ab = variation_of_information(a, b)
        vi_ba = variation_of_information(b, a)
        assert vi_ab == pytest.approx(vi_ba, abs=1e-12)
        assert 0.0 <= vi_ab <= 2 * math.log(24)

    @given(st.integers(0, 300))
    @settings(max_examples=30)
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 3, 18)
        b = rng.integers(0, 3, 18)
        c = rng.integers(0, 3, 18)
        ab = variation_of_information(a, b)
        bc = variation_of_information(b, c)
        ac = variation_of_information(a, c)
        assert ac <= ab + bc + 1e-9

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            variation_of_information([0, 1], [0, 1, 2])


class TestOverlapMatrix:
    def test_identical_clusterings_are_permutation_of_100(self):
        labels = np.array([0, 0, 1, 2, 2, 2])
        percent, rows, cols = overlap_matrix(labels, labels)
        assert np.allclose(percent, np.eye(3) * 100.0)

    def test_one_cluster_vs_halves(self):
        a = np.zeros(10)
        b = np.array([0] * 5 + [1] * 5)
        percent, _, _ = overlap_matrix(a, b)
        assert np.allclose(percent, [[50.0, 50.0]])

    def test_rows_sum_to_hundred(self):
        rng = np.random.default_rng(8)
        a = rng.integers(0, 5, 50)
        b = rng.integers(0, 3, 50)
        percent, _, _ = overlap_matrix(a, b)
        assert np.abs(percent.sum(axis=1) - 100.0).max() < 1e-6

    def test_counting_oracle(self):
        a = np.array([0, 0, 1, 1, 2, 2])
        b = np.array([0, 1, 1, 1, 0, 0])
        percent, rows, cols = overlap_matrix(a, b)
        # row for A-cluster 0: one member in b=0, one in b=1
        assert np.allclose(percent[0], [50.0, 50.0])
        # A-cluster 1: both members in b=1
        assert np.allclose(percent[1], [0.0, 100.0])
        # A-cluster 2: both members in b=0
        assert np.allclose(percent[2], [100.0, 0.0])


class TestMetricsReport:
    def test_planted_blobs_report(self):
        rng = np.random.default_rng(0)
        centers = np.eye(3) * 10
        points = np.vstack([centers[i] + 0.05 * rng.standard_normal((10, 3))
                            for i in range(3)])
        labels = np.repeat(np.arange(3), 10)
        report = metrics_report(points, labels)
        assert report.n_clusters == 3
        assert report.sizes == [10, 10, 10]
        assert report.gini == 0.0
        assert report.singleton_ratio == 0.0
        assert report.top10_coverage == 1.0
        assert report.silhouette > 0.9
        assert report.overall > 0.8
        assert report.overall == pytest.approx(composite_score(
            report.silhouette, report.davies_bouldin, report.calinski_harabasz,
            report.gini, report.top10_coverage, report.singleton_ratio))

    def test_single_cluster_report_uses_sentinels(self):
        points = np.random.default_rng(1).standard_normal((8, 3))
        report = metrics_report(points, np.zeros(8))
        assert report.silhouette == -1.0
        assert report.davies_bouldin == 10.0
        assert report.calinski_harabasz == 0.0
        assert report.overall == pytest.approx(0.300, abs=1e-3)

    def test_coverage_topk_partial(self):
        assert coverage_topk([4, 3, 2, 1], 2) == pytest.approx(0.7)
