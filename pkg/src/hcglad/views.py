"""Perturbation-free dual views of a graph.

View 1 carries the base node features unchanged; view 2 carries structural
encodings (random-walk return probabilities at steps 1..K). Neither view
touches the adjacency, so both share the source graph's structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Graph


@dataclass
class GraphView:
    view_tag: str  # "view1" or "view2"
    features: np.ndarray
    adjacency: np.ndarray


def build_view1(g: Graph, base_features: np.ndarray) -> GraphView:
    """Attribute-centric view: features are the base features, identity transform."""
    feats = np.asarray(base_features, dtype=np.float64)
    if feats.shape[0] != g.n:
        raise ValueError(f"graph {g.id}: {feats.shape[0]} feature rows for {g.n} nodes")
    return GraphView(view_tag="view1", features=feats, adjacency=g.adjacency)


def build_view2(g: Graph, walk_length: int = 8) -> GraphView:
    """Structure-centric view: K-step random-walk return probabilities.

    features[i, k-1] = (P^k)_{ii} with P = D^{-1} A row-stochastic;
    zero-degree rows of P stay zero, so isolated nodes encode to zeros.
    """
    if walk_length < 1:
        raise ValueError(f"walk_length must be >= 1, got {walk_length}")
    a = g.adjacency
    deg = a.sum(axis=1, keepdims=True)
    p = np.divide(a, deg, out=np.zeros_like(a), where=deg > 0)
    feats = np.zeros((g.n, walk_length))
    pk = p.copy()
    feats[:, 0] = np.diag(pk)
    for k in range(1, walk_length):
        pk = pk @ p
        feats[:, k] = np.diag(pk)
    return GraphView(view_tag="view2", features=feats, adjacency=g.adjacency)
