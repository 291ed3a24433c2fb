"""Hyperbolic graph-channel and hypergraph-channel encoders.

Both channels share the same skeleton: lift features to the hyperboloid,
log-map back to the origin tangent space, run L layers of normalized
message passing with a trainable weight per layer, then exp-map the result
onto the manifold. Mean pooling and the MLP projection heads also act in
the origin tangent space. Setting ``geometry="flat"`` replaces every
manifold map with the identity (the Euclidean ablation).

Layer weights are per channel and per view (the two views have different
feature widths); projection heads are per channel and per contrast level,
shared across views.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import lorentz
from .data import Graph
from .errors import ConfigError, IngestionError
from .hypergraph import Hypergraph, build_hypergraph
from .views import GraphView, build_view1, build_view2

CHANNELS = ("graph", "hyper")
VIEWS = ("view1", "view2")
LEVELS = ("node", "graph")

SNAPSHOT_MAGIC = b"HCGLAD1\n"


@dataclass
class EncoderConfig:
    layers: int = 2
    hidden: int = 16
    head_layers: int = 2
    final_activation: bool = True
    geometry: str = "lorentz"  # "lorentz" | "flat"

    def __post_init__(self):
        if self.geometry not in ("lorentz", "flat"):
            raise ConfigError(f"geometry must be lorentz or flat, got {self.geometry!r}")
        if self.layers < 1 or self.head_layers < 1 or self.hidden < 1:
            raise ConfigError("layers, head_layers and hidden must be >= 1")


@dataclass
class NodeEmbedding:
    """Per-node embedding rows for one (channel, view) of one graph."""

    points: ad.Tensor  # n x (hidden+1) on the hyperboloid (n x hidden when flat)
    channel: str
    view_tag: str

    @property
    def n(self) -> int:
        return self.points.shape[0]


class EncoderParams:
    """All trainable tensors, keyed by a stable dotted name."""

    def __init__(self, config: EncoderConfig, in_dims: dict[str, int]):
        self.config = config
        self.in_dims = dict(in_dims)
        self.params: dict[str, ad.Tensor] = {}

    @classmethod
    def initialize(cls, config: EncoderConfig, in_dims: dict[str, int], seed: int) -> "EncoderParams":
        """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
        self = cls(config, in_dims)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

        def glorot(rows, cols):
            bound = np.sqrt(6.0 / (rows + cols))
            return rng.uniform(-bound, bound, size=(rows, cols))

        h = config.hidden
        for channel in CHANNELS:
            for view in VIEWS:
                width = in_dims[view]
                for layer in range(config.layers):
                    name = f"{channel}.{view}.layer{layer}.W"
                    self.params[name] = ad.parameter(glorot(width, h), name=name)
                    width = h
            for level in LEVELS:
                for layer in range(config.head_layers):
                    wname = f"{channel}.head.{level}.layer{layer}.W"
                    bname = f"{channel}.head.{level}.layer{layer}.b"
                    self.params[wname] = ad.parameter(glorot(h, h), name=wname)
                    self.params[bname] = ad.parameter(np.zeros((1, h)), name=bname)
        return self

    def named_parameters(self) -> dict[str, ad.Tensor]:
        return self.params

    def layer_weights(self, channel: str, view: str) -> list[ad.Tensor]:
        return [
            self.params[f"{channel}.{view}.layer{l}.W"] for l in range(self.config.layers)
        ]

    def head_weights(self, channel: str, level: str) -> list[tuple[ad.Tensor, ad.Tensor]]:
        return [
            (
                self.params[f"{channel}.head.{level}.layer{l}.W"],
                self.params[f"{channel}.head.{level}.layer{l}.b"],
            )
            for l in range(self.config.head_layers)
        ]

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def save(self, path: str) -> None:
        header = {
            "config": {
                "layers": self.config.layers,
                "hidden": self.config.hidden,
                "head_layers": self.config.head_layers,
                "final_activation": self.config.final_activation,
                "geometry": self.config.geometry,
            },
            "in_dims": self.in_dims,
            "tensors": [
                {"name": k, "shape": list(t.values.shape)} for k, t in self.params.items()
            ],
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for t in self.params.values():
                fh.write(np.ascontiguousarray(t.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str) -> "EncoderParams":
        with open(path, "rb") as fh:
            magic = fh.read(len(SNAPSHOT_MAGIC))
            if magic != SNAPSHOT_MAGIC:
                raise IngestionError(f"{path}: not a parameter snapshot (bad magic)")
            try:
                (hlen,) = struct.unpack("<Q", fh.read(8))
                header = json.loads(fh.read(hlen).decode("utf-8"))
                config = EncoderConfig(**header["config"])
                self = cls(config, header["in_dims"])
                for entry in header["tensors"]:
                    rows, cols = entry["shape"]
                    raw = fh.read(rows * cols * 8)
                    if len(raw) != rows * cols * 8:
                        raise IngestionError(f"{path}: truncated tensor {entry['name']}")
                    arr = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
                    self.params[entry["name"]] = ad.parameter(arr, name=entry["name"])
            except IngestionError:
                raise
            except Exception as exc:
                raise IngestionError(f"{path}: corrupt parameter snapshot: {exc}") from exc
        return self


# ---------------------------------------------------------------------------
# propagation operators
# ---------------------------------------------------------------------------

def normalized_adjacency(a: np.ndarray) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I."""
    ahat = a + np.eye(a.shape[0])
    dinv = 1.0 / np.sqrt(ahat.sum(axis=1))
    return dinv[:, None] * ahat * dinv[None, :]


def hypergraph_mixing(hg: Hypergraph) -> np.ndarray:
    """D^{-1/2} H W B^{-1} H^T D^{-1/2}; zero rows for isolated vertices."""
    if hg.m == 0:
        return np.zeros((hg.n, hg.n))
    dv = hg.vertex_degrees
    dinv = np.divide(1.0, np.sqrt(dv), out=np.zeros_like(dv), where=dv > 0)
    core = hg.incidence * (hg.hyperedge_weights / hg.hyperedge_degrees)
    return dinv[:, None] * (core @ hg.incidence.T) * dinv[None, :]


@dataclass
class GraphBundle:
    """Per-graph constants precomputed once: operators and tangent features."""

    graph_id: int
    n: int
    s_graph: np.ndarray
    s_hyper: np.ndarray
    tangent: dict[str, np.ndarray]  # view tag -> n x d_view


def prepare_bundle(
    g: Graph,
    base_features: np.ndarray,
    walk_length: int,
    geometry: str = "lorentz",
    hg: Optional[Hypergraph] = None,
) -> GraphBundle:
    v1 = build_view1(g, base_features)
    v2 = build_view2(g, walk_length)
    hg = hg if hg is not None else build_hypergraph(g.adjacency)
    tangent = {}
    for view in (v1, v2):
        if geometry == "flat":
            tangent[view.view_tag] = view.features.copy()
        else:
            tangent[view.view_tag] = lorentz.log0_rows(lorentz.lift_rows(view.features))
    return GraphBundle(
        graph_id=g.id,
        n=g.n,
        s_graph=normalized_adjacency(g.adjacency),
        s_hyper=hypergraph_mixing(hg),
        tangent=tangent,
    )


def _propagate(
    operator: np.ndarray,
    tangent: np.ndarray,
    weights: list[ad.Tensor],
    config: EncoderConfig,
) -> ad.Tensor:
    h = ad.constant(tangent)
    s = ad.constant(operator)
    last = len(weights) - 1
    for i, w in enumerate(weights):
        h = ad.matmul(ad.matmul(s, h), w)
        if i < last or config.final_activation:
            h = ad.relu(h)
    if config.geometry == "flat":
        return h
    return lorentz.project(lorentz.exp0(h))


def graph_propagate(view: GraphView, params: EncoderParams) -> NodeEmbedding:
    """GCN-style channel on one view: sigma(D^-1/2 (A+I) D^-1/2 H W) per layer."""
    tangent = (
        view.features
        if params.config.geometry == "flat"
        else lorentz.log0_rows(lorentz.lift_rows(view.features))
    )
    out = _propagate(
        normalized_adjacency(view.adjacency),
        tangent,
        params.layer_weights("graph", view.view_tag),
        params.config,
    )
    return NodeEmbedding(points=out, channel="graph", view_tag=view.view_tag)


def hypergraph_propagate(view: GraphView, hg: Hypergraph, params: EncoderParams) -> NodeEmbedding:
    """Hyperedge-convolution channel on one view over the motif hypergraph."""
    if hg.n != view.features.shape[0]:
        raise ConfigError(
            f"hypergraph has {hg.n} vertices but view has {view.features.shape[0]} nodes"
        )
    tangent = (
        view.features
        if params.config.geometry == "flat"
        else lorentz.log0_rows(lorentz.lift_rows(view.features))
    )
    out = _propagate(
        hypergraph_mixing(hg),
        tangent,
        params.layer_weights("hyper", view.view_tag),
        params.config,
    )
    return NodeEmbedding(points=out, channel="hyper", view_tag=view.view_tag)


def pool_graph(emb: NodeEmbedding, geometry: str = "lorentz") -> ad.Tensor:
    """Mean pooling in the origin tangent space; returns a 1 x (d+1) point."""
    n = emb.n
    avg = ad.constant(np.full((1, n), 1.0 / n))
    if geometry == "flat":
        return ad.matmul(avg, emb.points)
    u = lorentz.log0(emb.points)
    return lorentz.project(lorentz.exp0(ad.matmul(avg, u)))


def project_head(
    points: ad.Tensor,
    params: EncoderParams,
    channel: str,
    level: str,
) -> ad.Tensor:
    """MLP head in tangent space: relu between layers, linear output."""
    geometry = params.config.geometry
    u = points if geometry == "flat" else lorentz.log0(points)
    layers = params.head_weights(channel, level)
    for k, (w, b) in enumerate(layers):
        u = ad.add_bias(ad.matmul(u, w), b)
        if k < len(layers) - 1:
            u = ad.relu(u)
    if geometry == "flat":
        return u
    return lorentz.project(lorentz.exp0(u))


@dataclass
class GraphForward:
    """Projected contrast-space embeddings for one graph."""

    graph_id: int
    n: int
    node_proj: dict[tuple[str, str], ad.Tensor] = field(default_factory=dict)
    graph_proj: dict[tuple[str, str], ad.Tensor] = field(default_factory=dict)


def forward_bundle(bundle: GraphBundle, params: EncoderParams) -> GraphForward:
    """Run both channels on both views of one precomputed graph."""
    cfg = params.config
    out = GraphForward(graph_id=bundle.graph_id, n=bundle.n)
    for channel, operator in (("graph", bundle.s_graph), ("hyper", bundle.s_hyper)):
        for view in VIEWS:
            h = _propagate(operator, bundle.tangent[view], params.layer_weights(channel, view), cfg)
            emb = NodeEmbedding(points=h, channel=channel, view_tag=view)
            out.node_proj[(channel, view)] = project_head(h, params, channel, "node")
            pooled = pool_graph(emb, cfg.geometry)
            out.graph_proj[(channel, view)] = project_head(pooled, params, channel, "graph")
    return out


def forward_batch(bundles: list[GraphBundle], params: EncoderParams) -> list[GraphForward]:
    """Forward a whole batch through one block-diagonal system per channel.

    Propagation is linear in the operator and the activations are
    row-wise, so stacking the graphs block-diagonally gives the same
    numbers as per-graph forwards while dispatching far fewer ops.
    """
    cfg = params.config
    sizes = [b.n for b in bundles]
    total = sum(sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    pool_op = np.zeros((len(bundles), total))
    for i, b in enumerate(bundles):
        pool_op[i, starts[i]:starts[i + 1]] = 1.0 / b.n
    pool_c = ad.constant(pool_op)

    outs = [GraphForward(graph_id=b.graph_id, n=b.n) for b in bundles]
    for channel, op_attr in (("graph", "s_graph"), ("hyper", "s_hyper")):
        operator = np.zeros((total, total))
        for i, b in enumerate(bundles):
            operator[starts[i]:starts[i + 1], starts[i]:starts[i + 1]] = getattr(b, op_attr)
        for view in VIEWS:
            tangent = np.vstack([b.tangent[view] for b in bundles])
            h = _propagate(operator, tangent, params.layer_weights(channel, view), cfg)
            node_stack = project_head(h, params, channel, "node")
            if cfg.geometry == "flat":
                pooled = ad.matmul(pool_c, h)
            else:
                pooled = lorentz.project(lorentz.exp0(ad.matmul(pool_c, lorentz.log0(h))))
            graph_stack = project_head(pooled, params, channel, "graph")
            for i in range(len(bundles)):
                outs[i].node_proj[(channel, view)] = ad.slice_rows(
                    node_stack, starts[i], starts[i + 1]
                )
                outs[i].graph_proj[(channel, view)] = ad.slice_rows(graph_stack, i, i + 1)
    return outs
