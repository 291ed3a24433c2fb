import numpy as np
import pytest

from hcglad.data import (
    Corpus,
    FeatureConfig,
    batch,
    corpus_feature_config,
    derive_base_features,
    make_split,
    parse_tudataset,
    write_tudataset,
)
from hcglad.errors import BatchError, ConsistencyError, DegenerateSplitError, IngestionError

from conftest import complete_graph, graph_from_edges, make_synthetic_corpus


def write_corpus_files(tmp_path, name, edges, indicator, graph_labels,
                       node_labels=None, node_attrs=None):
    d = tmp_path / name
    d.mkdir(exist_ok=True)
    (d / f"{name}_A.txt").write_text("\n".join(f"{i}, {j}" for i, j in edges) + "\n")
    (d / f"{name}_graph_indicator.txt").write_text("\n".join(map(str, indicator)) + "\n")
    (d / f"{name}_graph_labels.txt").write_text("\n".join(map(str, graph_labels)) + "\n")
    if node_labels is not None:
        (d / f"{name}_node_labels.txt").write_text("\n".join(map(str, node_labels)) + "\n")
    if node_attrs is not None:
        (d / f"{name}_node_attributes.txt").write_text(
            "\n".join(", ".join(map(str, row)) for row in node_attrs) + "\n"
        )
    return str(d)


class TestParse:
    def test_single_edge_both_directions(self, tmp_path):
        d = write_corpus_files(tmp_path, "T1", [(1, 2), (2, 1)], [1, 1], [0])
        corpus = parse_tudataset(d, "T1")
        assert corpus.m == 1
        g = corpus.graphs[0]
        assert g.n == 2 and g.num_edges == 1
        assert corpus.ingestion_report == {
            "graphs": 1, "nodes": 2, "edges": 1,
            "dropped_self_loops": 0, "dropped_duplicates": 0,
        }

    def test_self_loops_and_duplicates_dropped(self, tmp_path):
        d = write_corpus_files(
            tmp_path, "T2", [(1, 2), (2, 1), (1, 1), (1, 2)], [1, 1], [0]
        )
        corpus = parse_tudataset(d, "T2")
        assert corpus.graphs[0].num_edges == 1
        assert corpus.ingestion_report["dropped_self_loops"] == 1
        assert corpus.ingestion_report["dropped_duplicates"] == 1

    def test_missing_mandatory_file_named(self, tmp_path):
        d = write_corpus_files(tmp_path, "T3", [(1, 2)], [1, 1], [0])
        (tmp_path / "T3" / "T3_graph_labels.txt").unlink()
        with pytest.raises(IngestionError, match="T3_graph_labels.txt"):
            parse_tudataset(d, "T3")

    def test_edge_crossing_graphs_rejected(self, tmp_path):
        d = write_corpus_files(tmp_path, "T4", [(1, 3)], [1, 1, 2], [0, 1])
        with pytest.raises(ConsistencyError, match="crosses graphs"):
            parse_tudataset(d, "T4")

    def test_node_out_of_range_rejected(self, tmp_path):
        d = write_corpus_files(tmp_path, "T5", [(1, 9)], [1, 1], [0])
        with pytest.raises(ConsistencyError):
            parse_tudataset(d, "T5")

    def test_whitespace_tolerant(self, tmp_path):
        d = tmp_path / "T6"
        d.mkdir()
        (d / "T6_A.txt").write_text("1 ,  2\n2,1\n")
        (d / "T6_graph_indicator.txt").write_text("1\n1\n")
        (d / "T6_graph_labels.txt").write_text("0\n")
        corpus = parse_tudataset(str(d), "T6")
        assert corpus.graphs[0].num_edges == 1

    def test_attributes_and_labels_attached(self, tmp_path):
        d = write_corpus_files(
            tmp_path, "T7", [(1, 2), (2, 1)], [1, 1], [5],
            node_labels=[3, 4], node_attrs=[[0.5, 1.0], [2.0, -1.0]],
        )
        g = parse_tudataset(d, "T7").graphs[0]
        assert np.array_equal(g.node_labels, [3, 4])
        assert np.array_equal(g.node_attributes, [[0.5, 1.0], [2.0, -1.0]])
        assert g.graph_label == 5

    def test_interleaved_graph_indicator(self, tmp_path):
        # nodes of the two graphs alternate in the global numbering
        d = write_corpus_files(
            tmp_path, "T8",
            edges=[(1, 3), (3, 1), (2, 4), (4, 2)],
            indicator=[1, 2, 1, 2],
            graph_labels=[0, 1],
            node_attrs=[[1.0], [2.0], [3.0], [4.0]],
        )
        corpus = parse_tudataset(d, "T8")
        g0, g1 = corpus.graphs
        assert g0.n == 2 and g1.n == 2
        assert g0.num_edges == 1 and g1.num_edges == 1
        assert np.array_equal(g0.node_attributes, [[1.0], [3.0]])
        assert np.array_equal(g1.node_attributes, [[2.0], [4.0]])

    def test_all_adjacencies_symmetric_zero_diag(self, tmp_path):
        corpus = make_synthetic_corpus(20, 5)
        for g in corpus.graphs:
            assert np.array_equal(g.adjacency, g.adjacency.T)
            assert np.all(np.diag(g.adjacency) == 0)


class TestRoundTrip:
    def test_write_parse_identity(self, tmp_path):
        corpus = make_synthetic_corpus(12, 4, seed=3)
        out = tmp_path / "rt"
        write_tudataset(corpus, str(out))
        back = parse_tudataset(str(out), corpus.name)
        assert back.m == corpus.m
        for a, b in zip(corpus.graphs, back.graphs):
            assert np.array_equal(a.adjacency, b.adjacency)
            assert a.graph_label == b.graph_label
            assert np.array_equal(a.node_attributes, b.node_attributes)
        assert back.ingestion_report["dropped_self_loops"] == 0
        assert back.ingestion_report["dropped_duplicates"] == 0

    def test_round_trip_preserves_node_labels(self, tmp_path):
        corpus = make_synthetic_corpus(5, 2, seed=4)
        rng = np.random.default_rng(0)
        for g in corpus.graphs:
            g.node_labels = rng.integers(0, 4, size=g.n)
            g.node_attributes = None
        out = tmp_path / "rt_labels"
        write_tudataset(corpus, str(out))
        back = parse_tudataset(str(out), corpus.name)
        for a, b in zip(corpus.graphs, back.graphs):
            assert np.array_equal(a.node_labels, b.node_labels)
            assert b.node_attributes is None

    def test_double_round_trip_identical_files(self, tmp_path):
        corpus = make_synthetic_corpus(6, 2, seed=5)
        first = tmp_path / "a"
        second = tmp_path / "b"
        write_tudataset(corpus, str(first))
        write_tudataset(parse_tudataset(str(first), corpus.name), str(second))
        for name in sorted(p.name for p in first.iterdir()):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name


class TestFeatures:
    def test_attributes_pass_through(self):
        attrs = np.arange(9.0).reshape(3, 3)
        g = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)], attrs=attrs)
        out = derive_base_features(g, FeatureConfig())
        assert np.array_equal(out, attrs)
        out[0, 0] = 99.0
        assert g.node_attributes[0, 0] == 0.0  # caller gets a copy

    def test_label_one_hot_over_vocabulary(self):
        g = graph_from_edges(2, [(0, 1)])
        g.node_labels = np.array([1, 2])
        cfg = FeatureConfig(label_vocabulary=[0, 1, 2])
        out = derive_base_features(g, cfg)
        assert np.array_equal(out, [[0, 1, 0], [0, 0, 1]])

    def test_degree_one_hot_for_bare_triangle(self):
        g = complete_graph(3)
        out = derive_base_features(g, FeatureConfig(max_degree_bucket=4))
        assert out.shape == (3, 5)
        assert np.array_equal(out[0], out[1])
        assert np.array_equal(out[1], out[2])
        assert out[0, 2] == 1.0  # degree 2

    def test_degree_clamped_to_bucket(self):
        g = complete_graph(6)  # degree 5
        out = derive_base_features(g, FeatureConfig(max_degree_bucket=3))
        assert out[0, 3] == 1.0

    def test_corpus_vocab_collection(self):
        c = Corpus(
            name="V",
            graphs=[
                graph_from_edges(2, [(0, 1)], graph_id=0),
                graph_from_edges(2, [(0, 1)], graph_id=1),
            ],
        )
        c.graphs[0].node_labels = np.array([4, 2])
        c.graphs[1].node_labels = np.array([2, 7])
        cfg = corpus_feature_config(c)
        assert cfg.label_vocabulary == [2, 4, 7]


class TestSplit:
    def make_corpus(self, n_a=10, n_b=5):
        graphs = []
        for i in range(n_a + n_b):
            graphs.append(graph_from_edges(2, [(0, 1)], graph_id=i, label=int(i >= n_a)))
        return Corpus(name="S", graphs=graphs)

    def test_counts(self):
        split = make_split(self.make_corpus(10, 5), anomaly_class=1, train_fraction=0.8, seed=0)
        assert len(split.train_ids) == 8
        assert len(split.test_ids) == 7

    def test_determinism(self):
        c = self.make_corpus()
        s1 = make_split(c, 1, 0.8, seed=9)
        s2 = make_split(c, 1, 0.8, seed=9)
        assert s1 == s2

    def test_no_anomaly_leak_and_disjoint(self):
        c = self.make_corpus(30, 9)
        split = make_split(c, "minority", 0.7, seed=2)
        assert split.anomaly_class == 1
        labels = c.labels()
        assert all(labels[i] == 0 for i in split.train_ids)
        assert not set(split.train_ids) & set(split.test_ids)
        assert set(i for i in split.test_ids if labels[i] == 1) == set(range(30, 39))

    def test_minority_tie_breaks_to_smaller_label(self):
        c = self.make_corpus(5, 5)
        split = make_split(c, "minority", 0.8, seed=0)
        assert split.anomaly_class == 0

    def test_degenerate_split_rejected(self):
        graphs = [graph_from_edges(2, [(0, 1)], graph_id=i, label=3) for i in range(4)]
        with pytest.raises(DegenerateSplitError):
            make_split(Corpus(name="D", graphs=graphs), 3, 0.8, 0)

    def test_absent_class_rejected(self):
        with pytest.raises(DegenerateSplitError):
            make_split(self.make_corpus(), anomaly_class=42, train_fraction=0.8, seed=0)


class TestBatch:
    def test_partition_property(self):
        from hypothesis import given, settings
        from hypothesis import strategies as st

        @settings(max_examples=60, deadline=None)
        @given(n=st.integers(2, 60), size=st.integers(2, 20), seed=st.integers(0, 999))
        def check(n, size, seed):
            ids = list(range(100, 100 + n))
            out = batch(ids, size, seed)
            flat = [i for chunk in out for i in chunk]
            assert sorted(flat) == ids          # exact partition
            assert all(len(c) >= 2 for c in out)  # contrastive minimum
            assert all(len(c) <= size + 1 for c in out)  # tail merge adds at most one

        check()

    def test_short_tail_merged(self):
        out = batch(list(range(5)), 2, seed=0)
        assert sorted(len(b) for b in out) == [2, 3]
        assert sorted(i for b in out for i in b) == list(range(5))

    def test_even_chunks(self):
        out = batch(list(range(4)), 2, seed=0)
        assert [len(b) for b in out] == [2, 2]

    def test_determinism(self):
        assert batch(list(range(11)), 3, seed=5) == batch(list(range(11)), 3, seed=5)

    def test_too_few_ids(self):
        with pytest.raises(BatchError):
            batch([1], 2, seed=0)

    def test_tail_of_two_kept(self):
        out = batch(list(range(6)), 4, seed=1)
        assert sorted(len(b) for b in out) == [2, 4]
