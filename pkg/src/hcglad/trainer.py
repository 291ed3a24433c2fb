"""Training on normal graphs only, plus scoring and AUC evaluation.

The optimizer is plain SGD with weight decay and momentum. All trainable
tensors here live in flat space (layer weights and head weights; node
states reach the manifold only through exp maps of computed features), so
the manifold-aware update degenerates to the Euclidean one. The optimizer
sits behind a small class so a genuinely Riemannian variant could be
swapped in if manifold-valued parameters ever appear.

Every random choice flows from ``TrainConfig.seed`` through named
sub-seeds (split, init, batching, inference), so a config fully determines
the parameter trajectory and the evaluation report.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import autodiff as ad
from .contrast import ContrastConfig, batch_loss
from .data import Corpus, SplitPlan, batch, corpus_feature_config, derive_base_features
from .encoders import EncoderConfig, EncoderParams, GraphBundle, forward_batch, prepare_bundle
from .errors import ConfigError, DivergenceError, MetricUndefinedError
from .config import SEARCH_RANGES, derive_seed


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    momentum: float = 0.95
    seed: int = 0
    layers: int = 2
    hidden: int = 16
    head_layers: int = 2
    walk_length: int = 8
    tau: float = 0.2
    xi1: float = 1.0
    xi2: float = 1.0
    lam1: float = 0.5
    lam2: float = 0.5
    train_fraction: float = 0.8
    anomaly_class: object = "minority"
    max_degree_bucket: int = 32
    eval_batch: int = 128
    score_whole_set: bool = False
    geometry: str = "lorentz"
    final_activation: bool = True
    graph_encoder: str = "gcn"
    hypergraph_encoder: str = "hgnn"
    allow_out_of_range: bool = False

    def validate(self) -> None:
        if self.graph_encoder != "gcn":
            raise ConfigError(
                f"graph_encoder {self.graph_encoder!r} not implemented (only 'gcn')"
            )
        if self.hypergraph_encoder != "hgnn":
            raise ConfigError(
                f"hypergraph_encoder {self.hypergraph_encoder!r} not implemented (only 'hgnn')"
            )
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        violations = []
        for key, (lo, hi) in SEARCH_RANGES.items():
            value = getattr(self, key)
            if not (lo <= value <= hi):
                violations.append(f"{key}={value} outside [{lo}, {hi}]")
        if violations and not self.allow_out_of_range:
            raise ConfigError(
                "outside the tuning search space (set allow_out_of_range to override): "
                + "; ".join(violations)
            )

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            layers=self.layers,
            hidden=self.hidden,
            head_layers=self.head_layers,
            final_activation=self.final_activation,
            geometry=self.geometry,
        )

    def contrast_config(self) -> ContrastConfig:
        return ContrastConfig(
            tau=self.tau,
            xi1=self.xi1,
            xi2=self.xi2,
            lam1=self.lam1,
            lam2=self.lam2,
            geometry=self.geometry,
        )


def sgd_step(
    w: np.ndarray,
    g: np.ndarray,
    v: np.ndarray,
    lr: float,
    weight_decay: float,
    momentum: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One update: g' = g + wd*w; v' = momentum*v + g'; w' = w - lr*v'."""
    g_eff = g + weight_decay * w
    v_new = momentum * v + g_eff
    return w - lr * v_new, v_new


class SGD:
    """SGD with weight decay and momentum over named parameter tensors."""

    def __init__(self, params: EncoderParams, lr: float, weight_decay: float = 0.0, momentum: float = 0.0):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.momentum = momentum
        self.velocity = {
            name: np.zeros_like(t.values) for name, t in params.named_parameters().items()
        }

    def step(self) -> None:
        for name, t in self.params.named_parameters().items():
            t.values, self.velocity[name] = sgd_step(
                t.values, t.grad, self.velocity[name], self.lr, self.weight_decay, self.momentum
            )

    def zero_grad(self) -> None:
        self.params.zero_grad()


@dataclass
class TrainResult:
    params: EncoderParams
    loss_curve: list[dict]
    accessed_ids: set[int]
    in_dims: dict[str, int]


def prepare_corpus_bundles(corpus: Corpus, config: TrainConfig) -> list[GraphBundle]:
    """Precompute views, hypergraph operators and tangent features per graph."""
    feat_cfg = corpus_feature_config(corpus, config.max_degree_bucket)
    bundles = []
    for g in corpus.graphs:
        feats = derive_base_features(g, feat_cfg)
        bundles.append(prepare_bundle(g, feats, config.walk_length, config.geometry))
    return bundles


def train(
    corpus: Corpus,
    split: SplitPlan,
    config: TrainConfig,
    bundles: Optional[list[GraphBundle]] = None,
) -> TrainResult:
    """Contrastive training over the normal-only train split."""
    config.validate()
    if not split.train_ids:
        raise ConfigError("empty train split")
    anomalous = {g.id for g in corpus.graphs if g.graph_label == split.anomaly_class}
    if anomalous & set(split.train_ids):
        raise ConfigError("train split contains anomaly-class graphs")

    bundles = bundles if bundles is not None else prepare_corpus_bundles(corpus, config)
    by_id = {b.graph_id: b for b in bundles}
    in_dims = {
        view: bundles[0].tangent[view].shape[1] for view in ("view1", "view2")
    }
    params = EncoderParams.initialize(
        config.encoder_config(), in_dims, derive_seed(config.seed, "init")
    )
    optimizer = SGD(params, config.learning_rate, config.weight_decay, config.momentum)
    ccfg = config.contrast_config()

    loss_curve: list[dict] = []
    accessed: set[int] = set()
    for epoch in range(config.epochs):
        epoch_batches = batch(
            split.train_ids, config.batch_size, derive_seed(config.seed, "batching", epoch)
        )
        for bi, ids in enumerate(epoch_batches):
            accessed.update(ids)
            optimizer.zero_grad()
            with ad.Tape():
                forwards = forward_batch([by_id[i] for i in ids], params)
                report = batch_loss(forwards, ccfg)
                if not math.isfinite(report.total):
                    raise DivergenceError(
                        f"non-finite loss at epoch {epoch} batch {bi} (ids {ids[:8]}...)"
                    )
                ad.backward(report.total_tensor)
            optimizer.step()
            loss_curve.append(
                {
                    "epoch": epoch,
                    "batch": bi,
                    "L_node_g": report.node_loss["graph"],
                    "L_graph_g": report.graph_loss["graph"],
                    "L_node_hg": report.node_loss["hyper"],
                    "L_graph_hg": report.graph_loss["hyper"],
                    "L_total": report.total,
                }
            )
    return TrainResult(params=params, loss_curve=loss_curve, accessed_ids=accessed, in_dims=in_dims)


def write_loss_curve(loss_curve: list[dict], path: str) -> None:
    cols = ["epoch", "batch", "L_node_g", "L_graph_g", "L_node_hg", "L_graph_hg", "L_total"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in loss_curve:
            writer.writerow({k: _fmt(row[k]) for k in cols})


def _fmt(v):
    return f"{v:.10g}" if isinstance(v, float) else v


@dataclass
class EvalReport:
    rows: list[dict]          # per graph: id, score, is_anomaly
    auc: Optional[float]
    split_summary: dict
    config_echo: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "auc": self.auc,
                "split": self.split_summary,
                "config": self.config_echo,
                "scores": self.rows,
            },
            indent=2,
            sort_keys=True,
        )


def score_graphs(
    params: EncoderParams,
    corpus: Corpus,
    ids: list[int],
    config: TrainConfig,
    bundles: Optional[list[GraphBundle]] = None,
) -> dict[int, float]:
    """Anomaly scores for the given graphs over seeded inference batches."""
    bundles = bundles if bundles is not None else prepare_corpus_bundles(corpus, config)
    current = {v: bundles[0].tangent[v].shape[1] for v in ("view1", "view2")}
    if current != params.in_dims:
        raise ConfigError(
            f"feature widths {current} do not match the trained snapshot "
            f"{params.in_dims}; use the training walk_length/feature settings"
        )
    by_id = {b.graph_id: b for b in bundles}
    ccfg = config.contrast_config()
    if config.score_whole_set or len(ids) <= config.eval_batch:
        chunks = [list(ids)] if len(ids) >= 2 else []
        if not chunks:
            raise ConfigError("scoring needs at least 2 graphs for the contrastive batch")
    else:
        chunks = batch(ids, config.eval_batch, derive_seed(config.seed, "inference"))
    scores: dict[int, float] = {}
    for ids_chunk in chunks:
        forwards = forward_batch([by_id[i] for i in ids_chunk], params)
        report = batch_loss(forwards, ccfg)
        for gid, s in zip(report.graph_ids, report.anomaly_scores()):
            scores[gid] = float(s)
    return scores


def evaluate(
    params: EncoderParams,
    corpus: Corpus,
    split: SplitPlan,
    config: TrainConfig,
    bundles: Optional[list[GraphBundle]] = None,
) -> EvalReport:
    """Score every test graph and compute AUC against the anomaly class."""
    labels = {g.id: int(g.graph_label == split.anomaly_class) for g in corpus.graphs}
    test_labels = [labels[i] for i in split.test_ids]
    if len(set(test_labels)) < 2:
        raise MetricUndefinedError("test split has a single class; AUC undefined")
    scores = score_graphs(params, corpus, split.test_ids, config, bundles)
    ordered = sorted(scores)
    score_arr = np.array([scores[i] for i in ordered])
    label_arr = np.array([labels[i] for i in ordered])
    if not np.isfinite(score_arr).all():
        raise DivergenceError("non-finite anomaly score in evaluation")
    auc = compute_auc(score_arr, label_arr)
    rows = [
        {"id": int(i), "score": float(s), "is_anomaly": int(l)}
        for i, s, l in zip(ordered, score_arr, label_arr)
    ]
    return EvalReport(
        rows=rows,
        auc=auc,
        split_summary={
            "anomaly_class": int(split.anomaly_class),
            "train_size": len(split.train_ids),
            "test_size": len(split.test_ids),
            "test_anomalies": int(label_arr.sum()),
            "seed": split.seed,
        },
        config_echo={k: v for k, v in asdict(config).items()},
    )


def write_scores_csv(report: EvalReport, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "score", "label"])
        for row in report.rows:
            writer.writerow([row["id"], f"{row['score']:.12g}", row["is_anomaly"]])


def compute_auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC with average ranks on ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
