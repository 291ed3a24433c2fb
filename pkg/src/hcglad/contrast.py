"""Multi-level contrastive losses and the per-graph anomaly score.

For a node i of graph G the directional term is

    l(h1_i, h2_i) = -log [ exp(-d(h1_i, h2_i)/tau)
                           / sum_{k in V_G \\ i} exp(-d(h1_i, h2_k)/tau) ]

with d the Lorentz distance (Euclidean in the flat ablation). The
denominator runs over the *other* nodes only, so the term can go negative
when the positive pair is closer than every negative. Graph-level terms
are the same shape with the other graphs of the batch as negatives.

A graph's anomaly score is its own additive contribution to the total
loss of its inference batch: its node-level average plus its graph-level
terms, channel-weighted. Averaging the scores over the batch reproduces
the scalar loss exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import lorentz
from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class ContrastConfig:
    tau: float = 0.2
    xi1: float = 1.0   # node-level weight
    xi2: float = 1.0   # graph-level weight
    lam1: float = 0.5  # graph-channel weight
    lam2: float = 0.5  # hypergraph-channel weight
    geometry: str = "lorentz"

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        if self.lam1 < 0.0 or self.lam2 < 0.0 or (self.lam1 == 0.0 and self.lam2 == 0.0):
            raise ConfigError("channel weights must be >= 0 and not both zero")


def _cdist(a: ad.Tensor, b: ad.Tensor, geometry: str) -> ad.Tensor:
    if geometry == "flat":
        return lorentz.euclid_cdist(a, b)
    return lorentz.lorentz_cdist(a, b)


def _directional_terms(d: ad.Tensor, tau: float) -> ad.Tensor:
    """Column of l(row_i) values: D_ii/tau + logsumexp_{k != i}(-D_ik/tau)."""
    n = d.shape[0]
    eye = np.eye(n, dtype=bool)
    pos = ad.reduce("rowsum", ad.mul(d, ad.constant(eye.astype(float))))
    lse = ad.logsumexp_rows(ad.scale(d, -1.0 / tau), ~eye)
    return ad.add(ad.scale(pos, 1.0 / tau), lse)


def node_level_loss(
    emb_v1: list[ad.Tensor],
    emb_v2: list[ad.Tensor],
    tau: float,
    geometry: str = "lorentz",
) -> tuple[ad.Tensor, np.ndarray]:
    """Batch node-level loss and each graph's contribution.

    emb_v1[j] and emb_v2[j] are the node-aligned contrast embeddings of
    graph j in the two views. Graphs with a single node have no negatives
    and contribute zero (warned once per call).
    """
    if tau <= 0.0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    if len(emb_v1) != len(emb_v2):
        raise ConfigError("view lists differ in length")
    b = len(emb_v1)
    parts_t: list[ad.Tensor | None] = []
    singletons = 0
    for h1, h2 in zip(emb_v1, emb_v2):
        n = h1.shape[0]
        if h2.shape[0] != n:
            raise ConfigError("views of one graph must align node-for-node")
        if n < 2:
            singletons += 1
            parts_t.append(None)
            continue
        d = _cdist(h1, h2, geometry)
        l1 = _directional_terms(d, tau)
        l2 = _directional_terms(ad.transpose(d), tau)
        parts_t.append(ad.scale(ad.reduce("sum", ad.add(l1, l2)), 1.0 / (2 * n)))
    if singletons:
        logger.warning("node-level loss: %d single-node graph(s) contributed zero", singletons)
    live = [t for t in parts_t if t is not None]
    if live:
        total = ad.scale(ad.reduce("sum", ad.concat_rows(live)), 1.0 / b)
    else:
        total = ad.constant(np.zeros((1, 1)))
    parts = np.array([0.0 if t is None else t.item() for t in parts_t])
    return total, parts


def graph_level_loss(
    pooled_v1: ad.Tensor,
    pooled_v2: ad.Tensor,
    tau: float,
    geometry: str = "lorentz",
) -> tuple[ad.Tensor, np.ndarray]:
    """Batch graph-level loss and per-graph parts (both directions, halved)."""
    if tau <= 0.0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    b = pooled_v1.shape[0]
    if pooled_v2.shape[0] != b:
        raise ConfigError("pooled views differ in row count")
    if b < 2:
        raise ConfigError("graph-level contrast needs a batch of >= 2 graphs")
    d = _cdist(pooled_v1, pooled_v2, geometry)
    l1 = _directional_terms(d, tau)
    l2 = _directional_terms(ad.transpose(d), tau)
    both = ad.add(l1, l2)
    total = ad.scale(ad.reduce("sum", both), 1.0 / (2 * b))
    parts = both.values[:, 0] / 2.0
    return total, parts


def combine(node_loss: ad.Tensor, graph_loss: ad.Tensor, xi1: float, xi2: float) -> ad.Tensor:
    """Channel loss: xi1 * node + xi2 * graph."""
    return ad.add(ad.scale(node_loss, xi1), ad.scale(graph_loss, xi2))


def total_loss(graph_channel: ad.Tensor, hypergraph_channel: ad.Tensor, lam1: float, lam2: float) -> ad.Tensor:
    """lam1 * graph channel + lam2 * hypergraph channel."""
    return ad.add(ad.scale(graph_channel, lam1), ad.scale(hypergraph_channel, lam2))


@dataclass
class BatchLossReport:
    """Scalar losses plus each graph's additive contribution."""

    graph_ids: list[int]
    node_parts: dict[str, np.ndarray]
    graph_parts: dict[str, np.ndarray]
    node_loss: dict[str, float]
    graph_loss: dict[str, float]
    config: ContrastConfig
    total_tensor: ad.Tensor = field(repr=False)

    @property
    def total(self) -> float:
        return self.total_tensor.item()

    def channel_loss(self, channel: str) -> float:
        return (
            self.config.xi1 * self.node_loss[channel]
            + self.config.xi2 * self.graph_loss[channel]
        )

    def anomaly_scores(self) -> np.ndarray:
        """Per-graph contribution to the total loss; mean equals the scalar."""
        cfg = self.config
        per_channel = {
            ch: cfg.xi1 * self.node_parts[ch] + cfg.xi2 * self.graph_parts[ch]
            for ch in ("graph", "hyper")
        }
        return cfg.lam1 * per_channel["graph"] + cfg.lam2 * per_channel["hyper"]


def batch_loss(forwards: list, config: ContrastConfig) -> BatchLossReport:
    """Assemble node/graph losses on both channels for a batch of forwards.

    ``forwards`` are :class:`~hcglad.encoders.GraphForward` objects.
    """
    node_parts: dict[str, np.ndarray] = {}
    graph_parts: dict[str, np.ndarray] = {}
    node_scalars: dict[str, float] = {}
    graph_scalars: dict[str, float] = {}
    channel_tensors: dict[str, ad.Tensor] = {}
    for channel in ("graph", "hyper"):
        n_total, n_parts = node_level_loss(
            [f.node_proj[(channel, "view1")] for f in forwards],
            [f.node_proj[(channel, "view2")] for f in forwards],
            config.tau,
            config.geometry,
        )
        pooled1 = ad.concat_rows([f.graph_proj[(channel, "view1")] for f in forwards])
        pooled2 = ad.concat_rows([f.graph_proj[(channel, "view2")] for f in forwards])
        g_total, g_parts = graph_level_loss(pooled1, pooled2, config.tau, config.geometry)
        node_parts[channel] = n_parts
        graph_parts[channel] = g_parts
        node_scalars[channel] = n_total.item()
        graph_scalars[channel] = g_total.item()
        channel_tensors[channel] = combine(n_total, g_total, config.xi1, config.xi2)
    total = total_loss(channel_tensors["graph"], channel_tensors["hyper"], config.lam1, config.lam2)
    return BatchLossReport(
        graph_ids=[f.graph_id for f in forwards],
        node_parts=node_parts,
        graph_parts=graph_parts,
        node_loss=node_scalars,
        graph_loss=graph_scalars,
        config=config,
        total_tensor=total,
    )
