"""Hot numeric kernels: all-pairs BFS and four-point delta scans.

Each kernel has two implementations with identical semantics: a numba
``@njit`` version and a vectorized numpy version. The numba path is the
default; set ``HCGLAD_NO_NUMBA=1`` to force the numpy fallback (or when
numba is unavailable). ``benchmarks/kernels_bench.py`` times both.

Distance matrices are int32 with -1 marking unreachable pairs. Sampled
scans consume a caller-provided stream of candidate quadruples so the
numba and numpy paths see byte-identical draws.
"""

from __future__ import annotations

import itertools
import os

import numpy as np

_env = os.environ.get("HCGLAD_NO_NUMBA", "").lower()
NUMBA_DISABLED = _env in ("1", "true", "yes")

if not NUMBA_DISABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_DISABLED = True

USE_NUMBA = not NUMBA_DISABLED


# ---------------------------------------------------------------------------
# all-pairs BFS over a CSR adjacency
# ---------------------------------------------------------------------------

def adjacency_to_csr(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a)
    indptr = np.zeros(a.shape[0] + 1, dtype=np.int64)
    indptr[1:] = np.cumsum((a > 0).sum(axis=1))
    indices = np.nonzero(a)[1].astype(np.int64)
    return indptr, indices


def _bfs_all_pairs_py(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    n = indptr.shape[0] - 1
    dist = np.full((n, n), -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int64)
    for src in range(n):
        drow = dist[src]
        drow[src] = 0
        queue[0] = src
        head, tail = 0, 1
        while head < tail:
            u = queue[head]
            head += 1
            du = drow[u]
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if drow[v] < 0:
                    drow[v] = du + 1
                    queue[tail] = v
                    tail += 1
    return dist


def _bfs_all_pairs_np(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Level-synchronous BFS from all sources at once via boolean products."""
    n = indptr.shape[0] - 1
    adj = np.zeros((n, n), dtype=bool)
    for u in range(n):
        adj[u, indices[indptr[u]:indptr[u + 1]]] = True
    dist = np.full((n, n), -1, dtype=np.int32)
    np.fill_diagonal(dist, 0)
    frontier = np.eye(n, dtype=bool)
    visited = frontier.copy()
    level = 0
    while frontier.any():
        level += 1
        frontier = (frontier @ adj) & ~visited
        dist[frontier] = level
        visited |= frontier
    return dist


# ---------------------------------------------------------------------------
# four-point condition scans
# ---------------------------------------------------------------------------

def _delta_exhaustive_py(dist: np.ndarray) -> tuple[float, float, int, int]:
    """(max delta+, sum delta+, evaluated quadruples, skipped disconnected)."""
    n = dist.shape[0]
    worst = 0.0
    total = 0.0
    evaluated = 0
    skipped = 0
    for a in range(n):
        for b in range(a + 1, n):
            dab = dist[a, b]
            if dab < 0:
                rest = n - 1 - b
                skipped += rest * (rest - 1) // 2
                continue
            for c in range(b + 1, n):
                dac = dist[a, c]
                dbc = dist[b, c]
                if dac < 0 or dbc < 0:
                    skipped += n - 1 - c
                    continue
                for e in range(c + 1, n):
                    dae = dist[a, e]
                    dbe = dist[b, e]
                    dce = dist[c, e]
                    if dae < 0 or dbe < 0 or dce < 0:
                        skipped += 1
                        continue
                    s1 = dab + dce
                    s2 = dac + dbe
                    s3 = dae + dbc
                    hi = max(s1, s2, s3)
                    lo = min(s1, s2, s3)
                    mid = s1 + s2 + s3 - hi - lo
                    delta = (hi - mid) / 2.0
                    total += delta
                    evaluated += 1
                    if delta > worst:
                        worst = delta
    return worst, total, evaluated, skipped


def _delta_exhaustive_np(dist: np.ndarray) -> tuple[float, float, int, int]:
    n = dist.shape[0]
    if n < 4:
        return 0.0, 0.0, 0, 0
    quads = np.array(list(itertools.combinations(range(n), 4)), dtype=np.int64)
    a, b, c, e = quads.T
    d = dist.astype(np.int64)
    pieces = np.stack(
        [d[a, b], d[c, e], d[a, c], d[b, e], d[a, e], d[b, c]], axis=1
    )
    ok = (pieces >= 0).all(axis=1)
    sums = np.stack(
        [pieces[:, 0] + pieces[:, 1], pieces[:, 2] + pieces[:, 3], pieces[:, 4] + pieces[:, 5]],
        axis=1,
    )[ok]
    if sums.size == 0:
        return 0.0, 0.0, 0, int(quads.shape[0])
    hi = sums.max(axis=1)
    lo = sums.min(axis=1)
    mid = sums.sum(axis=1) - hi - lo
    deltas = (hi - mid) / 2.0
    return (
        float(deltas.max()),
        float(deltas.sum()),
        int(deltas.size),
        int(quads.shape[0] - deltas.size),
    )


def _delta_sampled_py(
    dist: np.ndarray, draws: np.ndarray, wanted: int
) -> tuple[float, float, int, int]:
    """Scan candidate quadruples until `wanted` valid ones are evaluated.

    Returns (max, sum, evaluated, rows_consumed).
    """
    worst = 0.0
    total = 0.0
    evaluated = 0
    consumed = 0
    for row in range(draws.shape[0]):
        if evaluated >= wanted:
            break
        consumed += 1
        a, b, c, e = draws[row, 0], draws[row, 1], draws[row, 2], draws[row, 3]
        if a == b or a == c or a == e or b == c or b == e or c == e:
            continue
        dab = dist[a, b]
        dce = dist[c, e]
        dac = dist[a, c]
        dbe = dist[b, e]
        dae = dist[a, e]
        dbc = dist[b, c]
        if dab < 0 or dce < 0 or dac < 0 or dbe < 0 or dae < 0 or dbc < 0:
            continue
        s1 = dab + dce
        s2 = dac + dbe
        s3 = dae + dbc
        hi = max(s1, s2, s3)
        lo = min(s1, s2, s3)
        mid = s1 + s2 + s3 - hi - lo
        delta = (hi - mid) / 2.0
        total += delta
        evaluated += 1
        if delta > worst:
            worst = delta
    return worst, total, evaluated, consumed


def _delta_sampled_np(
    dist: np.ndarray, draws: np.ndarray, wanted: int
) -> tuple[float, float, int, int]:
    if draws.shape[0] == 0 or wanted <= 0:
        return 0.0, 0.0, 0, 0
    a, b, c, e = draws.T
    distinct = (a != b) & (a != c) & (a != e) & (b != c) & (b != e) & (c != e)
    d = dist.astype(np.int64)
    pieces = np.stack([d[a, b], d[c, e], d[a, c], d[b, e], d[a, e], d[b, c]], axis=1)
    valid = distinct & (pieces >= 0).all(axis=1)
    # take the first `wanted` valid rows of the stream
    cum = np.cumsum(valid)
    if cum[-1] >= wanted:
        cutoff = int(np.searchsorted(cum, wanted)) + 1
    else:
        cutoff = draws.shape[0]
    take = valid[:cutoff]
    sums = np.stack(
        [pieces[:cutoff, 0] + pieces[:cutoff, 1],
         pieces[:cutoff, 2] + pieces[:cutoff, 3],
         pieces[:cutoff, 4] + pieces[:cutoff, 5]],
        axis=1,
    )[take]
    if sums.size == 0:
        return 0.0, 0.0, 0, cutoff
    hi = sums.max(axis=1)
    lo = sums.min(axis=1)
    mid = sums.sum(axis=1) - hi - lo
    deltas = (hi - mid) / 2.0
    return float(deltas.max()), float(deltas.sum()), int(deltas.size), cutoff


if USE_NUMBA:
    _bfs_all_pairs_nb = njit(cache=True)(_bfs_all_pairs_py)
    _delta_exhaustive_nb = njit(cache=True)(_delta_exhaustive_py)
    _delta_sampled_nb = njit(cache=True)(_delta_sampled_py)

    bfs_all_pairs = _bfs_all_pairs_nb
    delta_exhaustive = _delta_exhaustive_nb
    delta_sampled = _delta_sampled_nb
else:
    bfs_all_pairs = _bfs_all_pairs_np
    delta_exhaustive = _delta_exhaustive_np
    delta_sampled = _delta_sampled_np
