"""Hyperbolic contrastive graph-level anomaly detection.

Dual-view graph augmentation, triangle-motif hypergraphs, Lorentz-model
graph/hypergraph convolution, multi-level contrastive training on normal
graphs, anomaly scoring with AUC evaluation, and a Gromov-hyperbolicity
analysis tool.
"""

from .autodiff import Tape, Tensor, backward
from .contrast import ContrastConfig
from .data import Corpus, Graph, SplitPlan, make_split, parse_tudataset
from .encoders import EncoderConfig, EncoderParams
from .trainer import TrainConfig, compute_auc, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "ContrastConfig",
    "Corpus",
    "Graph",
    "SplitPlan",
    "make_split",
    "parse_tudataset",
    "EncoderConfig",
    "EncoderParams",
    "TrainConfig",
    "compute_auc",
    "evaluate",
    "train",
    "__version__",
]
