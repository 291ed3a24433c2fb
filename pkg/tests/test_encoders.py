import numpy as np
import pytest

from hcglad import autodiff as ad
from hcglad import lorentz as lz
from hcglad.data import Graph
from hcglad.encoders import (
    EncoderConfig,
    EncoderParams,
    forward_bundle,
    graph_propagate,
    hypergraph_propagate,
    hypergraph_mixing,
    normalized_adjacency,
    pool_graph,
    prepare_bundle,
    project_head,
    NodeEmbedding,
)
from hcglad.hypergraph import Hypergraph, build_hypergraph
from hcglad.views import build_view1, build_view2

from conftest import (
    assert_grads_match,
    complete_graph,
    graph_from_edges,
    random_er_graph,
    triangle_pendant,
)


def make_params(in_dims, seed=0, **cfg_kw):
    cfg = EncoderConfig(**cfg_kw)
    return EncoderParams.initialize(cfg, in_dims, seed)


def lift_log_prelude(x):
    return lz.log0_rows(lz.lift_rows(x))


class TestOperators:
    def test_normalized_adjacency_single_node(self):
        assert np.array_equal(normalized_adjacency(np.zeros((1, 1))), [[1.0]])

    def test_normalized_adjacency_edgeless_is_identity(self):
        assert np.array_equal(normalized_adjacency(np.zeros((3, 3))), np.eye(3))

    def test_mixing_single_hyperedge_is_uniform(self):
        n = 5
        hg = Hypergraph(incidence=np.ones((n, 1)), hyperedge_weights=np.ones(1))
        assert np.allclose(hypergraph_mixing(hg), np.full((n, n), 1.0 / n))

    def test_mixing_triangle_pendant_dense_oracle(self):
        hg = build_hypergraph(triangle_pendant().adjacency)
        h = hg.incidence
        d = np.diag(1.0 / np.sqrt([1.0, 1.0, 2.0, 1.0]))
        b_inv = np.diag([1.0 / 3.0, 1.0 / 2.0])
        w = np.eye(2)
        want = d @ h @ w @ b_inv @ h.T @ d
        assert np.allclose(hypergraph_mixing(hg), want, atol=1e-15)

    def test_mixing_symmetric_positive_semidefinite(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = random_er_graph(int(rng.integers(3, 10)), 0.5, rng)
            s = hypergraph_mixing(build_hypergraph(g.adjacency))
            assert np.allclose(s, s.T, atol=1e-15)
            eigs = np.linalg.eigvalsh(s)
            assert eigs.min() >= -1e-10

    def test_mixing_isolated_vertex_row_zero(self):
        g = graph_from_edges(4, [(0, 1), (1, 2), (0, 2)])
        s = hypergraph_mixing(build_hypergraph(g.adjacency))
        assert np.array_equal(s[3], np.zeros(4))
        assert np.array_equal(s[:, 3], np.zeros(4))


class TestGraphPropagate:
    def test_isolated_node_is_pure_feedforward(self):
        x = np.array([[0.4, -1.2, 0.7]])
        g = Graph(id=0, adjacency=np.zeros((1, 1)), graph_label=0, node_attributes=x)
        params = make_params({"view1": 3, "view2": 2}, hidden=5)
        emb = graph_propagate(build_view1(g, x), params)
        h = lift_log_prelude(x)
        for w in params.layer_weights("graph", "view1"):
            h = np.maximum(h @ w.values, 0.0)
        want = lz.project_rows_np(lz.exp0_rows(h))
        assert np.allclose(emb.points.values, want, atol=1e-12)

    def test_identical_feature_pair_identical_rows(self):
        x = np.tile([[1.0, 2.0]], (2, 1))
        g = graph_from_edges(2, [(0, 1)], attrs=x)
        params = make_params({"view1": 2, "view2": 2}, hidden=4)
        emb = graph_propagate(build_view1(g, x), params)
        assert np.allclose(emb.points.values[0], emb.points.values[1], atol=1e-14)

    def test_triangle_automorphism_invariance(self):
        g = complete_graph(3)
        x = np.tile([[0.5, -0.5]], (3, 1))
        params = make_params({"view1": 2, "view2": 2})
        emb = graph_propagate(build_view1(g, x), params)
        assert np.allclose(emb.points.values[0], emb.points.values[1], atol=1e-14)
        assert np.allclose(emb.points.values[1], emb.points.values[2], atol=1e-14)

    def test_rows_on_hyperboloid(self):
        rng = np.random.default_rng(1)
        g = random_er_graph(8, 0.4, rng)
        x = rng.normal(size=(8, 3))
        params = make_params({"view1": 3, "view2": 2}, hidden=6)
        emb = graph_propagate(build_view1(g, x), params)
        assert lz.manifold_defect(emb.points.values).max() <= 1e-6

    def test_edgeless_graph_is_per_node_feedforward(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(3, 2))
        edgeless = Graph(id=0, adjacency=np.zeros((3, 3)), graph_label=0, node_attributes=x)
        params = make_params({"view1": 2, "view2": 2}, hidden=4)
        emb = graph_propagate(build_view1(edgeless, x), params)
        for row in range(3):
            solo = Graph(id=0, adjacency=np.zeros((1, 1)), graph_label=0,
                         node_attributes=x[row:row + 1])
            solo_emb = graph_propagate(build_view1(solo, x[row:row + 1]), params)
            assert np.allclose(emb.points.values[row], solo_emb.points.values[0], atol=1e-12)


class TestHypergraphPropagate:
    def test_rows_on_hyperboloid(self):
        rng = np.random.default_rng(2)
        g = random_er_graph(7, 0.6, rng)
        x = rng.normal(size=(7, 3))
        params = make_params({"view1": 3, "view2": 2}, hidden=6)
        hg = build_hypergraph(g.adjacency)
        emb = hypergraph_propagate(build_view1(g, x), hg, params)
        assert emb.channel == "hyper"
        assert lz.manifold_defect(emb.points.values).max() <= 1e-6

    def test_single_hyperedge_rows_equal_mean_feedforward(self):
        # one hyperedge over all nodes: every pre-activation row is the
        # tangent-feature mean times the layer weight
        rng = np.random.default_rng(9)
        n = 5
        x = rng.normal(size=(n, 3))
        g = Graph(id=0, adjacency=np.ones((n, n)) - np.eye(n), graph_label=0,
                  node_attributes=x)
        hg = Hypergraph(incidence=np.ones((n, 1)), hyperedge_weights=np.ones(1))
        params = make_params({"view1": 3, "view2": 2}, hidden=4, layers=1)
        emb = hypergraph_propagate(build_view1(g, x), hg, params)
        tangent = lift_log_prelude(x)
        p0 = params.params["hyper.view1.layer0.W"].values
        row = np.maximum(tangent.mean(axis=0) @ p0, 0.0)
        want = lz.project_rows_np(lz.exp0_rows(np.tile(row, (n, 1))))
        assert np.allclose(emb.points.values, want, atol=1e-12)

    def test_edgeless_graph_empty_hypergraph_forward(self):
        # M=0 hypergraph: zero mixing operator, every row lands at the origin
        x = np.array([[0.5, 1.0], [2.0, -1.0], [0.0, 3.0]])
        g = Graph(id=0, adjacency=np.zeros((3, 3)), graph_label=0, node_attributes=x)
        hg = build_hypergraph(g.adjacency)
        assert hg.m == 0
        params = make_params({"view1": 2, "view2": 3}, hidden=4)
        emb = hypergraph_propagate(build_view1(g, x), hg, params)
        want = np.zeros((3, 5))
        want[:, 0] = 1.0
        assert np.allclose(emb.points.values, want, atol=1e-12)
        bundle = prepare_bundle(g, x, walk_length=3)
        fwd = forward_bundle(bundle, params)
        for t in fwd.node_proj.values():
            assert np.isfinite(t.values).all()

    def test_mismatched_hypergraph_rejected(self):
        g = complete_graph(3)
        other = build_hypergraph(complete_graph(4).adjacency)
        params = make_params({"view1": 2, "view2": 2})
        x = np.ones((3, 2))
        from hcglad.errors import ConfigError

        with pytest.raises(ConfigError):
            hypergraph_propagate(build_view1(g, x), other, params)


class TestPermutationSymmetry:
    def test_full_pipeline_equivariance_and_pooled_invariance(self):
        rng = np.random.default_rng(3)
        n = 7
        g = random_er_graph(n, 0.5, rng)
        x = rng.normal(size=(n, 3))
        g.node_attributes = x
        perm = rng.permutation(n)
        g2 = Graph(
            id=1,
            adjacency=g.adjacency[np.ix_(perm, perm)],
            graph_label=0,
            node_attributes=x[perm],
        )
        params = make_params({"view1": 3, "view2": 4}, hidden=5)
        b1 = prepare_bundle(g, x, walk_length=4)
        b2 = prepare_bundle(g2, x[perm], walk_length=4)
        f1 = forward_bundle(b1, params)
        f2 = forward_bundle(b2, params)
        for key in f1.node_proj:
            assert np.allclose(
                f2.node_proj[key].values, f1.node_proj[key].values[perm], atol=1e-10
            )
            assert np.allclose(
                f2.graph_proj[key].values, f1.graph_proj[key].values, atol=1e-10
            )


class TestPooling:
    def test_single_node_unchanged(self):
        pts = lz.lift_rows(np.array([[0.7, -0.3]]))
        emb = NodeEmbedding(points=ad.constant(pts), channel="graph", view_tag="view1")
        out = pool_graph(emb)
        assert np.allclose(out.values, pts, atol=1e-12)

    def test_antipodal_tangents_pool_to_origin(self):
        v = np.array([[0.9, -0.4], [-0.9, 0.4]])
        pts = lz.exp0_rows(v)
        emb = NodeEmbedding(points=ad.constant(pts), channel="graph", view_tag="view1")
        out = pool_graph(emb)
        assert np.allclose(out.values, [[1.0, 0.0, 0.0]], atol=1e-12)

    def test_pooled_point_on_hyperboloid(self):
        rng = np.random.default_rng(4)
        pts = lz.lift_rows(rng.normal(size=(9, 4)))
        emb = NodeEmbedding(points=ad.constant(pts), channel="hyper", view_tag="view2")
        out = pool_graph(emb)
        assert lz.manifold_defect(out.values).max() <= 1e-8


class TestProjectHead:
    def test_zero_input_zero_bias_gives_origin(self):
        params = make_params({"view1": 2, "view2": 2}, hidden=4)
        pts = ad.constant(lz.exp0_rows(np.zeros((3, 4))))
        out = project_head(pts, params, "graph", "node")
        want = np.zeros((3, 5))
        want[:, 0] = 1.0
        assert np.allclose(out.values, want, atol=1e-12)

    def test_output_on_hyperboloid(self):
        rng = np.random.default_rng(5)
        params = make_params({"view1": 2, "view2": 2}, hidden=4, seed=3)
        pts = ad.constant(lz.lift_rows(rng.normal(size=(6, 4))))
        out = project_head(pts, params, "hyper", "graph")
        assert lz.manifold_defect(out.values).max() <= 1e-8

    def test_head_gradients_match_fd(self):
        rng = np.random.default_rng(6)
        params = make_params({"view1": 2, "view2": 2}, hidden=3, seed=1)
        pts = lz.lift_rows(rng.normal(size=(4, 3)))
        w0 = params.params["graph.head.node.layer0.W"].values.copy()
        b0 = params.params["graph.head.node.layer0.b"].values.copy()
        w1 = params.params["graph.head.node.layer1.W"].values.copy()

        def build(t):
            u = lz.log0(ad.constant(pts))
            u = ad.relu(ad.add_bias(ad.matmul(u, t["w0"]), t["b0"]))
            u = ad.matmul(u, t["w1"])
            out = lz.project(lz.exp0(u))
            return lz.lorentz_cdist(out, ad.constant(lz.lift_rows(np.ones((2, 3))))).sum()

        assert_grads_match(build, {"w0": w0, "b0": b0, "w1": w1}, rtol=1e-4)


class TestFlatGeometry:
    def test_flat_shapes_and_finiteness(self):
        rng = np.random.default_rng(7)
        g = random_er_graph(6, 0.5, rng)
        x = rng.normal(size=(6, 3))
        params = make_params({"view1": 3, "view2": 4}, hidden=5, geometry="flat")
        b = prepare_bundle(g, x, walk_length=4, geometry="flat")
        f = forward_bundle(b, params)
        for key, t in f.node_proj.items():
            assert t.shape == (6, 5)  # no extra manifold coordinate
            assert np.isfinite(t.values).all()
        for key, t in f.graph_proj.items():
            assert t.shape == (1, 5)


class TestSnapshot:
    def test_save_load_roundtrip(self, tmp_path):
        params = make_params({"view1": 3, "view2": 4}, hidden=5, seed=11)
        path = str(tmp_path / "p.hcglad")
        params.save(path)
        with open(path, "rb") as fh:
            assert fh.read(8) == b"HCGLAD1\n"
        back = EncoderParams.load(path)
        assert back.config == params.config
        assert set(back.params) == set(params.params)
        for k in params.params:
            assert np.array_equal(back.params[k].values, params.params[k].values)

    def test_corrupt_snapshot_rejected(self, tmp_path):
        path = tmp_path / "bad.hcglad"
        path.write_bytes(b"HCGLAD1\n\x10\x00\x00")
        from hcglad.errors import IngestionError

        with pytest.raises(IngestionError):
            EncoderParams.load(str(path))

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "not.hcglad"
        path.write_bytes(b"GARBAGE!")
        from hcglad.errors import IngestionError

        with pytest.raises(IngestionError):
            EncoderParams.load(str(path))
