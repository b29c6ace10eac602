"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` exactly (same enumeration order, same
counter-based edge draws) and are used when the compiled extension is
unavailable or ``RCMOMENTS_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def run_key(seed: int, run: int) -> int:
    """Stream key for one simulation run, derived from ``(seed, run)``."""
    return mix64(mix64(seed ^ GOLDEN) + (run + 1) * GOLDEN)


def pair_uniform(key: int, i: int, j: int) -> float:
    """Uniform in [0, 1) for the unordered node pair ``{i, j}`` under ``key``."""
    i, j = sorted((int(i), int(j)))
    z = mix64(key ^ mix64(((i << 32) | j) + GOLDEN))
    return (z >> 11) * 2.0**-53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def pair_uniforms(key: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Vectorized :func:`pair_uniform`; requires ``i < j`` elementwise."""
    with np.errstate(over="ignore"):
        pair = (i.astype(np.uint64) << np.uint64(32)) | j.astype(np.uint64)
        z = _mix64_array(np.uint64(key) ^ _mix64_array(pair + np.uint64(GOLDEN)))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def nonflat_labels(n: int, r: int, prefix: tuple[int, ...] = ()):
    """Yield 0-based restricted-growth label tuples of non-flat partitions.

    Cells are row-major; a block may hold at most one cell per row.
    Lexicographic order. With ``prefix``, only completions of that (valid)
    label prefix are produced.
    """
    size = n * r
    labels = [0] * size
    row_masks: list[int] = []
    for pos, b in enumerate(prefix):
        bit = 1 << (pos // r)
        if b > len(row_masks):
            raise ValueError(f"invalid non-flat prefix {prefix!r}")
        if b == len(row_masks):
            row_masks.append(0)
        if row_masks[b] & bit:
            raise ValueError(f"invalid non-flat prefix {prefix!r}")
        row_masks[b] |= bit
        labels[pos] = b

    def rec(pos: int):
        if pos == size:
            yield tuple(labels)
            return
        bit = 1 << (pos // r)
        nblocks = len(row_masks)
        for b in range(nblocks):
            if row_masks[b] & bit:
                continue
            row_masks[b] |= bit
            labels[pos] = b
            yield from rec(pos + 1)
            row_masks[b] &= ~bit
        row_masks.append(bit)
        labels[pos] = nblocks
        yield from rec(pos + 1)
        row_masks.pop()

    yield from rec(len(prefix))


def nonflat_count(n: int, r: int) -> int:
    return sum(1 for _ in nonflat_labels(n, r))


def adjacency_matrix(nodes: np.ndarray, beta: float, key: int) -> np.ndarray:
    """Symmetric boolean adjacency: pair ``{i, j}`` is joined iff its
    counter-based uniform falls below ``exp(-beta |x_i - x_j|^2)``."""
    total = len(nodes)
    iu, ju = np.triu_indices(total, k=1)
    diff = nodes[iu] - nodes[ju]
    prob = np.exp(-beta * np.sum(diff * diff, axis=1))
    present = pair_uniforms(key, iu, ju) < prob
    adj = np.zeros((total, total), dtype=bool)
    adj[iu[present], ju[present]] = True
    return adj | adj.T


def count_paths_adjacency(adj: np.ndarray, kmax: int) -> np.ndarray:
    """Path counts on an adjacency whose last two nodes are source and sink.

    ``counts[k]`` is the number of ordered tuples of pairwise-distinct
    configuration points forming a k-hop source-to-sink path.
    """
    m = len(adj) - 2
    counts = np.zeros(kmax + 1, dtype=np.int64)
    if kmax >= 1 and adj[m, m + 1]:
        counts[1] = 1
    if kmax < 2 or m == 0:
        return counts

    nbrs = [np.flatnonzero(adj[v, :m]).tolist() for v in range(m)]
    to_sink = adj[:m, m + 1].tolist()
    visited = [False] * m
    max_depth = kmax - 1

    def dfs(v: int, depth: int):
        if to_sink[v]:
            counts[depth + 1] += 1
        if depth == max_depth:
            return
        visited[v] = True
        for w in nbrs[v]:
            if not visited[w]:
                dfs(w, depth + 1)
        visited[v] = False

    for v in np.flatnonzero(adj[m, :m]).tolist():
        dfs(v, 1)
    return counts


def count_paths(points: np.ndarray, source: np.ndarray, sink: np.ndarray,
                beta: float, key: int, kmax: int) -> np.ndarray:
    """Count source-to-sink paths with vertex-distinct intermediates.

    Node ids: configuration points ``0..m-1``, source ``m``, sink ``m+1``.
    Returns ``counts`` of length ``kmax + 1`` with ``counts[k]`` the number of
    k-hop paths (``counts[0]`` is always 0).
    """
    m = len(points)
    nodes = np.vstack([np.asarray(points, dtype=np.float64).reshape(m, len(source)),
                       source[None, :], sink[None, :]])
    return count_paths_adjacency(adjacency_matrix(nodes, beta, key), kmax)
