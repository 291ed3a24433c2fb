import numpy as np
import pytest

from hcglad.data import FeatureConfig, derive_base_features
from hcglad.views import build_view1, build_view2

from conftest import complete_graph, graph_from_edges, random_er_graph


class TestView1:
    def test_attributes_identity(self):
        attrs = np.arange(6.0).reshape(3, 2)
        g = graph_from_edges(3, [(0, 1)], attrs=attrs)
        v = build_view1(g, derive_base_features(g, FeatureConfig()))
        assert v.view_tag == "view1"
        assert np.array_equal(v.features, attrs)
        assert v.adjacency is g.adjacency

    def test_bare_triangle_identical_rows(self):
        g = complete_graph(3)
        v = build_view1(g, derive_base_features(g, FeatureConfig()))
        assert np.array_equal(v.features[0], v.features[1])
        assert np.array_equal(v.features[1], v.features[2])

    def test_single_isolated_node(self):
        g = graph_from_edges(1, [])
        v = build_view1(g, derive_base_features(g, FeatureConfig()))
        assert v.features.shape[0] == 1
        assert v.adjacency.shape == (1, 1)
        assert v.adjacency.sum() == 0


class TestView2:
    def test_step1_column_is_zero(self):
        for g in (complete_graph(4), graph_from_edges(5, [(0, 1), (1, 2), (3, 4)])):
            v = build_view2(g, walk_length=3)
            assert np.array_equal(v.features[:, 0], np.zeros(g.n))

    def test_triangle_two_step_return_half(self):
        g = complete_graph(3)
        v = build_view2(g, walk_length=2)
        # oracle: P = A/2, diagonal of P @ P
        p = g.adjacency / 2.0
        want = np.diag(np.linalg.matrix_power(p, 2))
        assert np.allclose(v.features[:, 1], want)
        assert np.allclose(v.features[:, 1], 0.5)

    def test_matrix_power_oracle_deeper(self):
        rng = np.random.default_rng(0)
        g = random_er_graph(8, 0.5, rng)
        k = 6
        v = build_view2(g, walk_length=k)
        deg = g.adjacency.sum(axis=1, keepdims=True)
        p = np.divide(g.adjacency, deg, out=np.zeros_like(g.adjacency), where=deg > 0)
        for step in range(1, k + 1):
            want = np.diag(np.linalg.matrix_power(p, step))
            assert np.allclose(v.features[:, step - 1], want, atol=1e-12)

    def test_isolated_node_row_is_zero(self):
        g = graph_from_edges(3, [(0, 1)])
        v = build_view2(g, walk_length=4)
        assert np.array_equal(v.features[2], np.zeros(4))

    def test_entries_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = random_er_graph(int(rng.integers(2, 10)), 0.4, rng)
            f = build_view2(g, walk_length=8).features
            assert f.min() >= 0.0 and f.max() <= 1.0

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(2)
        g = random_er_graph(7, 0.5, rng)
        perm = rng.permutation(7)
        a2 = g.adjacency[np.ix_(perm, perm)]
        g2 = graph_from_edges(7, [])
        g2.adjacency = a2
        f1 = build_view2(g, walk_length=5).features
        f2 = build_view2(g2, walk_length=5).features
        assert np.allclose(f2, f1[perm])

    def test_adjacency_shared_between_views(self):
        g = complete_graph(4)
        v1 = build_view1(g, derive_base_features(g, FeatureConfig()))
        v2 = build_view2(g, walk_length=2)
        assert v1.adjacency is v2.adjacency

    def test_bad_walk_length(self):
        with pytest.raises(ValueError):
            build_view2(complete_graph(3), walk_length=0)
