"""Triangle-motif hypergraph construction.

The relation matrix (A@A) * A counts, per edge, the triangles through it.
Each node with any triangle-neighbor spawns a candidate hyperedge {itself
plus those neighbors}; identical candidates are deduplicated. Edges on no
triangle are kept as 2-node hyperedges so the hypergraph covers the whole
graph. Hyperedge weights are fixed to the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Corpus, Graph
from .errors import ConsistencyError


@dataclass
class Hypergraph:
    """Incidence + diagonal degree/weight matrices, stored as vectors."""

    incidence: np.ndarray         # N x M, 0/1
    hyperedge_weights: np.ndarray  # M, all ones here

    @property
    def n(self) -> int:
        return self.incidence.shape[0]

    @property
    def m(self) -> int:
        return self.incidence.shape[1]

    @property
    def vertex_degrees(self) -> np.ndarray:
        # D_ii = sum_e W_ee * H[i, e]
        return self.incidence @ self.hyperedge_weights

    @property
    def hyperedge_degrees(self) -> np.ndarray:
        # B_ee = sum_i H[i, e]
        return self.incidence.sum(axis=0)

    def isolated_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.incidence.sum(axis=1) == 0)


def _check_adjacency(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConsistencyError(f"adjacency must be square, got {a.shape}")
    if not np.array_equal(a, a.T):
        raise ConsistencyError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0.0):
        raise ConsistencyError("adjacency must have a zero diagonal")
    if not np.isin(a, (0.0, 1.0)).all():
        raise ConsistencyError("adjacency entries must be 0/1")
    return a


def relation_matrix(a: np.ndarray) -> np.ndarray:
    """(A@A) * A: entry (i,j) is the triangle count through edge (i,j)."""
    a = _check_adjacency(a)
    return (a @ a) * a


def build_hypergraph(a: np.ndarray) -> Hypergraph:
    """Motif hyperedges from relation-matrix rows plus leftover pairwise edges.

    Column order is deterministic: sorted by (min member, size, members).
    A single-node graph gets one self-hyperedge so downstream encoders stay
    defined; isolated vertices in larger graphs stay out of every hyperedge.
    """
    a = _check_adjacency(a)
    n = a.shape[0]
    if n == 1:
        return Hypergraph(incidence=np.ones((1, 1)), hyperedge_weights=np.ones(1))

    rel = (a @ a) * a
    edges: set[tuple] = set()
    for i in range(n):
        neighbors = np.flatnonzero(rel[i] > 0)
        if neighbors.size:
            edges.add(tuple(sorted({i, *neighbors.tolist()})))
    rows, cols = np.nonzero(np.triu(a))
    for u, v in zip(rows.tolist(), cols.tolist()):
        if rel[u, v] == 0:
            edges.add((u, v))
    ordered = sorted((e for e in edges if len(e) >= 2), key=lambda e: (e[0], len(e), e))
    inc = np.zeros((n, len(ordered)))
    for col, members in enumerate(ordered):
        inc[list(members), col] = 1.0
    return Hypergraph(incidence=inc, hyperedge_weights=np.ones(len(ordered)))


def count_triangles(a: np.ndarray) -> int:
    """Total triangles: each contributes 1 to six directed relation entries."""
    return int(round(relation_matrix(a).sum() / 6.0))


def motif_stats(corpus: Corpus) -> list[dict]:
    """Per-graph hypergraph statistics (rows of the motif-stats CSV)."""
    out = []
    for g in corpus.graphs:
        hg = build_hypergraph(g.adjacency)
        sizes = hg.hyperedge_degrees
        out.append(
            {
                "graph_id": g.id,
                "n": g.n,
                "edges": g.num_edges,
                "triangles": count_triangles(g.adjacency),
                "motif_hyperedges": int((sizes >= 3).sum()),
                "pairwise_hyperedges": int((sizes == 2).sum()),
            }
        )
    return out
