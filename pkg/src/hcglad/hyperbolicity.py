"""Gromov four-point hyperbolicity of graphs.

For a quadruple of connected nodes, sort the three pairings of opposite
shortest-path sums as S <= M <= L; delta+ = (L - M) / 2. A tree gives 0
everywhere. ``exhaustive`` scans all C(n,4) quadruples (small graphs);
``sampled`` draws seeded uniform quadruples with rejection on repeated or
disconnected nodes, and extends its draw stream deterministically so more
samples never lower the observed maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .data import Corpus, Graph
from .errors import CapExceededError

DEFAULT_NODE_CAP = 40
DEFAULT_SAMPLES = 100_000
_CHUNK_ROWS = 65_536


@dataclass
class HyperbolicityReport:
    delta_worst: float
    delta_avg: float
    quadruples_evaluated: int
    mode: str  # "exhaustive" | "sampled"
    seed: Optional[int] = None
    skipped_disconnected: int = 0


def distance_matrix(g: Graph | np.ndarray) -> np.ndarray:
    """All-pairs BFS hop counts; -1 marks unreachable pairs."""
    a = g.adjacency if isinstance(g, Graph) else np.asarray(g)
    indptr, indices = _kernels.adjacency_to_csr(a)
    return _kernels.bfs_all_pairs(indptr, indices)


def delta_plus(distances, quadruple: Sequence[int]) -> float:
    """(L - M)/2 from the sorted pair-sums of one quadruple.

    ``distances`` is either a distance matrix or a callable d(i, j).
    Raises ValueError on repeated or mutually unreachable nodes.
    """
    quad = list(quadruple)
    if len(quad) != 4 or len(set(quad)) != 4:
        raise ValueError(f"need four distinct nodes, got {quadruple}")
    d = distances if callable(distances) else (lambda i, j: distances[i, j])
    a, b, c, e = quad
    pieces = [d(a, b), d(c, e), d(a, c), d(b, e), d(a, e), d(b, c)]
    if any(p < 0 for p in pieces):
        raise ValueError(f"quadruple {quadruple} is not pairwise connected")
    sums = sorted([pieces[0] + pieces[1], pieces[2] + pieces[3], pieces[4] + pieces[5]])
    return (sums[2] - sums[1]) / 2.0


def exhaustive(g: Graph | np.ndarray, cap: int = DEFAULT_NODE_CAP) -> HyperbolicityReport:
    """delta_worst and delta_avg over every connected quadruple."""
    dist = distance_matrix(g)
    n = dist.shape[0]
    if n > cap:
        raise CapExceededError(
            f"graph has {n} nodes > cap {cap}; use sampled() for large graphs"
        )
    if n < 4:
        return HyperbolicityReport(0.0, 0.0, 0, "exhaustive")
    worst, total, evaluated, skipped = _kernels.delta_exhaustive(dist)
    avg = total / evaluated if evaluated else 0.0
    return HyperbolicityReport(
        delta_worst=float(worst),
        delta_avg=float(avg),
        quadruples_evaluated=int(evaluated),
        mode="exhaustive",
        skipped_disconnected=int(skipped),
    )


def sampled(
    g: Graph | np.ndarray,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> HyperbolicityReport:
    """Max and mean delta+ over seeded uniform quadruple draws.

    Rejected draws (repeats, disconnected) are redrawn from the same
    stream, with the total attempt budget capped at 20x samples + 1000.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    dist = distance_matrix(g)
    n = dist.shape[0]
    if n < 4:
        return HyperbolicityReport(0.0, 0.0, 0, "sampled", seed=seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    budget = samples * 20 + 1000
    worst = 0.0
    total = 0.0
    evaluated = 0
    while evaluated < samples and budget > 0:
        rows = min(_CHUNK_ROWS, budget)
        draws = rng.integers(0, n, size=(rows, 4), dtype=np.int64)
        w, t, k, _consumed = _kernels.delta_sampled(dist, draws, samples - evaluated)
        worst = max(worst, float(w))
        total += float(t)
        evaluated += int(k)
        budget -= rows
    avg = total / evaluated if evaluated else 0.0
    return HyperbolicityReport(
        delta_worst=worst,
        delta_avg=avg,
        quadruples_evaluated=evaluated,
        mode="sampled",
        seed=seed,
    )


def graph_report(
    g: Graph | np.ndarray,
    mode: str = "auto",
    cap: int = DEFAULT_NODE_CAP,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> HyperbolicityReport:
    if mode == "auto":
        n = (g.n if isinstance(g, Graph) else np.asarray(g).shape[0])
        mode = "exhaustive" if n <= cap else "sampled"
    if mode == "exhaustive":
        return exhaustive(g, cap=cap)
    if mode == "sampled":
        return sampled(g, samples=samples, seed=seed)
    raise ValueError(f"unknown mode {mode!r}")


def corpus_report(
    corpus: Corpus,
    mode: str = "auto",
    aggregate: str = "max",
    cap: int = DEFAULT_NODE_CAP,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> tuple[list[dict], dict]:
    """Per-graph rows plus dataset aggregates.

    ``aggregate`` picks how per-graph delta_worst values collapse to one
    dataset delta ("max" or "mean"); delta_avg is always the mean of the
    per-graph averages.
    """
    if aggregate not in ("max", "mean"):
        raise ValueError(f"aggregate must be max or mean, got {aggregate!r}")
    rows = []
    for g in corpus.graphs:
        rep = graph_report(g, mode=mode, cap=cap, samples=samples, seed=seed)
        rows.append(
            {
                "dataset": corpus.name,
                "graph_id": g.id,
                "delta_worst": rep.delta_worst,
                "delta_avg": rep.delta_avg,
                "quadruples": rep.quadruples_evaluated,
                "mode": rep.mode,
            }
        )
    worsts = np.array([r["delta_worst"] for r in rows])
    avgs = np.array([r["delta_avg"] for r in rows])
    aggregates = {
        "dataset": corpus.name,
        "delta": float(worsts.max() if aggregate == "max" else worsts.mean()) if rows else 0.0,
        "delta_avg": float(avgs.mean()) if rows else 0.0,
        "aggregate": aggregate,
        "graphs": len(rows),
    }
    return rows, aggregates
