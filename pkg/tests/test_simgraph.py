"""Similarity matrix construction, calibration, and the graph file format."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcvc.simgraph import (
    GRAPH_MAGIC,
    CostGraph,
    build_cost_graph,
    calibrate,
    cosine_matrix,
    read_graph,
    write_graph,
)


class TestCosineMatrix:
    def test_orthogonal_unit_vectors(self):
        sims = cosine_matrix(np.eye(3))
        assert np.allclose(sims, np.eye(3))

    def test_scale_invariance(self):
        v = np.array([[1.0, 2.0], [3.0, 6.0]])  # 3v is parallel to v
        sims = cosine_matrix(v)
        assert sims[0, 1] == pytest.approx(1.0)

    def test_hand_computed_45_degrees(self):
        sims = cosine_matrix(np.array([[1.0, 0.0], [1.0, 1.0]]))
        assert sims[0, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_zero_norm_row_named(self):
        with pytest.raises(ValueError, match="row 1"):
            cosine_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))

    @given(st.integers(1, 12), st.integers(0, 1000))
    @settings(max_examples=40)
    def test_symmetry_diagonal_range(self, n, seed):
        rng = np.random.default_rng(seed)
        vectors = rng.standard_normal((n, 5))
        sims = cosine_matrix(vectors)
        assert np.array_equal(sims, sims.T)  # exact, not approximate
        assert np.allclose(np.diag(sims), 1.0)
        assert (np.abs(sims) <= 1.0 + 1e-6).all()

    def test_normalization_invariance(self):
        rng = np.random.default_rng(5)
        vectors = rng.standard_normal((6, 4))
        unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        assert np.abs(cosine_matrix(vectors) - cosine_matrix(unit)).max() < 1e-6


class TestCalibrate:
    def test_boundary_zero_cost(self):
        sims = np.array([[1.0, 0.5], [0.5, 1.0]])
        graph = calibrate(sims, 0.5)
        assert graph.cost(0, 1) == pytest.approx(0.0)

    def test_low_cal_makes_high_similarity_repulsive(self):
        sims = np.array([[1.0, 0.8], [0.8, 1.0]])
        graph = calibrate(sims, 0.1)
        assert graph.cost(0, 1) == pytest.approx(-0.1)

    def test_raising_cal_shifts_all_edges_up(self):
        rng = np.random.default_rng(2)
        vectors = rng.standard_normal((8, 3))
        sims = cosine_matrix(vectors)
        low = calibrate(sims, 0.1)
        high = calibrate(sims, 0.9)
        iu = np.triu_indices(8, 1)
        assert np.allclose(high.costs[iu] - low.costs[iu], 0.8)

    def test_monotone_attractive_set(self):
        rng = np.random.default_rng(3)
        sims = cosine_matrix(rng.standard_normal((10, 4)))
        attractive_prev: set = set()
        iu = np.triu_indices(10, 1)
        for cal in [0.1, 0.3, 0.5, 0.7, 0.9]:
            graph = calibrate(sims, cal)
            attractive = {(int(i), int(j)) for i, j in zip(*iu)
                          if graph.costs[i, j] > 0}
            assert attractive_prev <= attractive
            attractive_prev = attractive

    @pytest.mark.parametrize("cal", [0.0, 1.0, -0.2, 1.5])
    def test_cal_outside_open_interval_rejected(self, cal):
        with pytest.raises(ValueError, match="cal"):
            calibrate(np.eye(2), cal)

    def test_diagonal_zeroed(self):
        graph = calibrate(np.eye(3), 0.4)
        assert np.array_equal(np.diag(graph.costs), np.zeros(3))


class TestGraphFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        graph = build_cost_graph(rng.standard_normal((7, 3)), 0.6)
        path = tmp_path / "graph.bin"
        write_graph(path, graph)
        loaded = read_graph(path)
        assert loaded.n == 7
        # written as f32, so compare at f32 resolution
        assert np.allclose(loaded.costs, graph.costs, atol=1e-6)
        assert np.array_equal(loaded.costs, loaded.costs.T)

    def test_header_layout(self, tmp_path):
        graph = CostGraph(3, np.zeros((3, 3)))
        path = tmp_path / "graph.bin"
        write_graph(path, graph)
        raw = path.read_bytes()
        assert raw[:4] == GRAPH_MAGIC
        assert len(raw) == 4 + 4 + 3 * 4  # magic, n, 3 edges

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "graph.bin"
        path.write_bytes(b"NOPE" + bytes(8))
        with pytest.raises(ValueError, match="magic"):
            read_graph(path)

    def test_truncated_payload(self, tmp_path):
        graph = CostGraph(4, np.zeros((4, 4)))
        path = tmp_path / "graph.bin"
        write_graph(path, graph)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ValueError, match="payload"):
            read_graph(path)
