"""TUDataset-format corpora: parsing, features, splits, batching.

File layout expected under ``<dir>/<DS>_*.txt``:

* ``_A.txt``              lines "i, j" with 1-based global node ids
* ``_graph_indicator.txt``  line k = 1-based graph id of node k
* ``_graph_labels.txt``     line g = integer label of graph g
* ``_node_labels.txt``      optional, line k = integer label of node k
* ``_node_attributes.txt``  optional, line k = comma-separated reals

Self-loops and repeated directed lines are dropped (counted in the
ingestion report); listing both (i,j) and (j,i) is the normal symmetric
convention, not a duplicate.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BatchError,
    ConsistencyError,
    DegenerateSplitError,
    IngestionError,
)


@dataclass
class Graph:
    """One undirected graph: 0/1 symmetric adjacency, optional features."""

    id: int
    adjacency: np.ndarray
    graph_label: int
    node_attributes: Optional[np.ndarray] = None
    node_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ConsistencyError(f"graph {self.id}: adjacency must be square, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ConsistencyError(f"graph {self.id}: adjacency not symmetric")
        if np.any(np.diag(a) != 0.0):
            raise ConsistencyError(f"graph {self.id}: adjacency has self-loops")
        if not np.isin(a, (0.0, 1.0)).all():
            raise ConsistencyError(f"graph {self.id}: adjacency entries must be 0/1")
        self.adjacency = a
        if self.node_attributes is not None:
            x = np.asarray(self.node_attributes, dtype=np.float64)
            if x.shape[0] != a.shape[0]:
                raise ConsistencyError(
                    f"graph {self.id}: {x.shape[0]} attribute rows for {a.shape[0]} nodes"
                )
            self.node_attributes = x
        if self.node_labels is not None:
            self.node_labels = np.asarray(self.node_labels, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


@dataclass
class Corpus:
    name: str
    graphs: list[Graph]
    ingestion_report: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [g.id for g in self.graphs]
        if sorted(ids) != list(range(len(ids))):
            raise ConsistencyError("graph ids must be unique and dense in [0, m)")

    @property
    def m(self) -> int:
        return len(self.graphs)

    def labels(self) -> np.ndarray:
        return np.array([g.graph_label for g in self.graphs], dtype=np.int64)


@dataclass
class SplitPlan:
    anomaly_class: int
    train_ids: list[int]
    test_ids: list[int]
    seed: int


@dataclass
class FeatureConfig:
    """How to derive base node features when attributes are absent."""

    label_vocabulary: Optional[list[int]] = None
    max_degree_bucket: int = 32


def _read_int_lines(path: str) -> list[int]:
    with open(path, encoding="utf-8") as fh:
        return [int(float(line.strip())) for line in fh if line.strip()]


def parse_tudataset(dir_path: str, dataset_name: str) -> Corpus:
    """Assemble a Corpus from TUDataset text files.

    Raises IngestionError if a mandatory file is missing and
    ConsistencyError if an edge crosses graph boundaries or references an
    unknown node.
    """
    def p(suffix):
        return os.path.join(dir_path, f"{dataset_name}_{suffix}.txt")

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not os.path.exists(p(suffix)):
            raise IngestionError(f"missing mandatory file: {p(suffix)}")

    indicator = _read_int_lines(p("graph_indicator"))
    graph_labels = _read_int_lines(p("graph_labels"))
    n_total = len(indicator)
    m = len(graph_labels)
    if max(indicator, default=0) > m or min(indicator, default=1) < 1:
        raise ConsistencyError("graph_indicator references a graph id outside [1, m]")

    node_labels = None
    if os.path.exists(p("node_labels")):
        node_labels = _read_int_lines(p("node_labels"))
        if len(node_labels) != n_total:
            raise ConsistencyError(
                f"node_labels has {len(node_labels)} lines for {n_total} nodes"
            )
    node_attrs = None
    if os.path.exists(p("node_attributes")):
        with open(p("node_attributes"), encoding="utf-8") as fh:
            node_attrs = [
                [float(tok) for tok in line.strip().split(",")]
                for line in fh
                if line.strip()
            ]
        if len(node_attrs) != n_total:
            raise ConsistencyError(
                f"node_attributes has {len(node_attrs)} lines for {n_total} nodes"
            )

    # global node id -> (graph index 0-based, local node index)
    sizes = np.zeros(m, dtype=np.int64)
    for gid in indicator:
        sizes[gid - 1] += 1
    local = np.zeros(n_total, dtype=np.int64)
    counters = np.zeros(m, dtype=np.int64)
    for k, gid in enumerate(indicator):
        local[k] = counters[gid - 1]
        counters[gid - 1] += 1

    adjacencies = [np.zeros((int(s), int(s))) for s in sizes]
    dropped_self = 0
    dropped_dup = 0
    seen_directed: set[tuple[int, int]] = set()
    total_edges = 0
    with open(p("A"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                i_s, j_s = line.split(",")
                i, j = int(i_s.strip()), int(j_s.strip())
            except ValueError as exc:
                raise IngestionError(f"{p('A')}:{lineno}: malformed edge line {line!r}") from exc
            if not (1 <= i <= n_total and 1 <= j <= n_total):
                raise ConsistencyError(f"{p('A')}:{lineno}: node id outside [1, {n_total}]")
            if i == j:
                dropped_self += 1
                continue
            gi, gj = indicator[i - 1], indicator[j - 1]
            if gi != gj:
                raise ConsistencyError(
                    f"{p('A')}:{lineno}: edge ({i},{j}) crosses graphs {gi} and {gj}"
                )
            if (i, j) in seen_directed:
                dropped_dup += 1
                continue
            seen_directed.add((i, j))
            a = adjacencies[gi - 1]
            li, lj = local[i - 1], local[j - 1]
            if a[li, lj] == 0.0:
                total_edges += 1
            a[li, lj] = 1.0
            a[lj, li] = 1.0

    # nodes of a graph need not be contiguous in the global numbering
    members: list[list[int]] = [[] for _ in range(m)]
    for k, gid in enumerate(indicator):
        members[gid - 1].append(k)

    graphs = []
    for g in range(m):
        if not members[g]:
            raise ConsistencyError(f"graph {g} has zero nodes")
        rows = members[g]
        graphs.append(
            Graph(
                id=g,
                adjacency=adjacencies[g],
                graph_label=graph_labels[g],
                node_attributes=np.array([node_attrs[k] for k in rows]) if node_attrs else None,
                node_labels=np.array([node_labels[k] for k in rows]) if node_labels else None,
            )
        )

    report = {
        "graphs": m,
        "nodes": n_total,
        "edges": total_edges,
        "dropped_self_loops": dropped_self,
        "dropped_duplicates": dropped_dup,
    }
    return Corpus(name=dataset_name, graphs=graphs, ingestion_report=report)


def write_tudataset(corpus: Corpus, dir_path: str) -> None:
    """Serialize a corpus back to TUDataset text files (round-trip safe)."""
    os.makedirs(dir_path, exist_ok=True)
    name = corpus.name

    def p(suffix):
        return os.path.join(dir_path, f"{name}_{suffix}.txt")

    indicator_lines = []
    edge_lines = []
    label_lines = []
    attr_lines = []
    offset = 0
    has_labels = all(g.node_labels is not None for g in corpus.graphs)
    has_attrs = all(g.node_attributes is not None for g in corpus.graphs)
    for g in corpus.graphs:
        for k in range(g.n):
            indicator_lines.append(str(g.id + 1))
        rows, cols = np.nonzero(g.adjacency)
        for r, c in zip(rows, cols):
            edge_lines.append(f"{offset + r + 1}, {offset + c + 1}")
        if has_labels:
            label_lines.extend(str(int(v)) for v in g.node_labels)
        if has_attrs:
            attr_lines.extend(
                ", ".join(repr(float(v)) for v in row) for row in g.node_attributes
            )
        offset += g.n

    with open(p("A"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(edge_lines) + ("\n" if edge_lines else ""))
    with open(p("graph_indicator"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(indicator_lines) + "\n")
    with open(p("graph_labels"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(g.graph_label) for g in corpus.graphs) + "\n")
    if has_labels:
        with open(p("node_labels"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(label_lines) + "\n")
    if has_attrs:
        with open(p("node_attributes"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(attr_lines) + "\n")


def write_ingestion_report(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(corpus.ingestion_report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def corpus_feature_config(corpus: Corpus, max_degree_bucket: int = 32) -> FeatureConfig:
    """Collect the corpus-wide node-label vocabulary for one-hot features."""
    vocab = None
    if all(g.node_labels is not None for g in corpus.graphs):
        seen = set()
        for g in corpus.graphs:
            seen.update(int(v) for v in g.node_labels)
        vocab = sorted(seen)
    return FeatureConfig(label_vocabulary=vocab, max_degree_bucket=max_degree_bucket)


def derive_base_features(g: Graph, config: FeatureConfig) -> np.ndarray:
    """Base node features: attributes, else label one-hots, else degree one-hots."""
    if g.node_attributes is not None:
        return g.node_attributes.copy()
    if g.node_labels is not None and config.label_vocabulary:
        vocab = {v: i for i, v in enumerate(config.label_vocabulary)}
        out = np.zeros((g.n, len(vocab)))
        for row, lab in enumerate(g.node_labels):
            out[row, vocab[int(lab)]] = 1.0
        return out
    cap = config.max_degree_bucket
    out = np.zeros((g.n, cap + 1))
    buckets = np.minimum(g.degrees().astype(np.int64), cap)
    out[np.arange(g.n), buckets] = 1.0
    return out


def make_split(
    corpus: Corpus,
    anomaly_class="minority",
    train_fraction: float = 0.8,
    seed: int = 0,
) -> SplitPlan:
    """Normal-only train split; test = held-out normals + all anomalies.

    ``anomaly_class="minority"`` resolves to the label with fewest graphs,
    ties broken toward the smaller label value.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplitError(f"train_fraction must be in (0,1), got {train_fraction}")
    labels = corpus.labels()
    values, counts = np.unique(labels, return_counts=True)
    if anomaly_class == "minority":
        anomaly_class = int(values[np.lexsort((values, counts))[0]])
    else:
        anomaly_class = int(anomaly_class)
        if anomaly_class not in values:
            raise DegenerateSplitError(f"anomaly class {anomaly_class} absent from corpus")
    normal_ids = [g.id for g in corpus.graphs if g.graph_label != anomaly_class]
    anomaly_ids = [g.id for g in corpus.graphs if g.graph_label == anomaly_class]
    if not normal_ids:
        raise DegenerateSplitError(f"class {anomaly_class} covers every graph")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(len(normal_ids))
    shuffled = [normal_ids[i] for i in order]
    cut = int(train_fraction * len(shuffled))
    train_ids = sorted(shuffled[:cut])
    test_ids = sorted(shuffled[cut:] + anomaly_ids)
    return SplitPlan(
        anomaly_class=anomaly_class, train_ids=train_ids, test_ids=test_ids, seed=seed
    )


def batch(ids: Sequence[int], size: int, seed: int) -> list[list[int]]:
    """Seeded permutation chunked into batches; a short tail (<2) merges back."""
    ids = list(ids)
    if len(ids) < 2:
        raise BatchError(f"need at least 2 ids to batch, got {len(ids)}")
    if size < 2:
        raise BatchError(f"batch size must be >= 2, got {size}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    chunks = [shuffled[i:i + size] for i in range(0, len(shuffled), size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        tail = chunks.pop()
        chunks[-1].extend(tail)
    return chunks
