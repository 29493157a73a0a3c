"""Shared graph factories and independent test oracles.

Everything here deliberately avoids the library's BFS/CSR machinery so the
oracles stay independent of the code paths they check: distances come from
Floyd-Warshall, matrix powers from numpy dense algebra, and normalizations
from dense hand arithmetic.
"""
from __future__ import annotations

import numpy as np

from shellprop import SparseGraph, build_graph, is_connected

BIG = 10**9  # oracle-side unreachable marker


def path_graph(n: int) -> SparseGraph:
    return build_graph([(i, i + 1) for i in range(n - 1)], n)


def complete_graph(n: int) -> SparseGraph:
    return build_graph([(i, j) for i in range(n) for j in range(i + 1, n)], n)


def star_graph(leaves: int) -> SparseGraph:
    return build_graph([(0, i) for i in range(1, leaves + 1)], leaves + 1)


def two_disjoint_edges() -> SparseGraph:
    return build_graph([(0, 1), (2, 3)], 4)


def random_graph(seed: int, n: int, p: float) -> SparseGraph:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    take = rng.random(len(iu)) < p
    return build_graph(np.column_stack([iu[take], ju[take]]), n)


def random_connected_graph(seed: int, n: int, p: float) -> SparseGraph:
    """Rejection-sample a connected G(n, p); deterministic per seed."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(500):
        take = rng.random(len(iu)) < p
        g = build_graph(np.column_stack([iu[take], ju[take]]), n)
        if is_connected(g):
            return g
    raise AssertionError(f"no connected sample for seed={seed} n={n} p={p}")


def random_tree(seed: int, n: int) -> SparseGraph:
    """Random recursive tree: each node attaches to a uniform earlier node."""
    rng = np.random.default_rng(seed)
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    return build_graph(edges, n)


def floyd_warshall(g: SparseGraph) -> np.ndarray:
    """All-pairs shortest hop counts; BIG marks unreachable pairs."""
    n = g.n
    dist = np.full((n, n), BIG, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    for u in range(n):
        for v in g.neighbors(u):
            dist[u, v] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    return dist


def dense_adjacency(g: SparseGraph) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    for u in range(g.n):
        a[u, g.neighbors(u)] = 1.0
    return a


def dense_sym_norm(t_dense: np.ndarray) -> np.ndarray:
    """Hand normalization oracle: D^{-1/2} (T + I) D^{-1/2}, dense."""
    n = t_dense.shape[0]
    with_loops = t_dense + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return with_loops * np.outer(inv_sqrt, inv_sqrt)


def dense_shells(g: SparseGraph) -> list[np.ndarray]:
    """Exact-distance shells straight from the Floyd-Warshall oracle."""
    dist = floyd_warshall(g)
    finite = dist[dist < BIG]
    top = int(finite.max()) if finite.size else 0
    return [(dist == level).astype(float) for level in range(1, top + 1)]


def dense_fused(g: SparseGraph, alpha: float) -> np.ndarray:
    """Dense fusion oracle: sum of decayed normalized shells."""
    out = np.zeros((g.n, g.n))
    for level, shell in enumerate(dense_shells(g), start=1):
        out += (1.0 - 1.0 / alpha) ** level * dense_sym_norm(shell)
    return out


def reference_forward(params, x, fused_dense: np.ndarray) -> np.ndarray:
    """Independent dense forward pass (dropout off); returns probabilities."""
    z = np.maximum(x @ params.w1 + params.b1, 0.0)
    s = fused_dense @ z
    logits = s @ params.w2 + params.b2
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)
