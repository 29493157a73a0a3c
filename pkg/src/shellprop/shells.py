"""Distance-shell decomposition and the PPR-weighted fused propagator.

A graph's reachable ordered pairs are partitioned into disjoint hop shells:
shell l holds exactly the pairs (i, j), i != j, at shortest-path distance l.
Each shell is symmetrically normalized after adding self-loops, and the
shells are combined with geometrically decaying coefficients into a single
propagation operator that is always applied shell by shell, never
materialized densely.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .graph import (
    UNREACHABLE,
    SparseGraph,
    SparseMatrix,
    distance_blocks,
    is_symmetric,
    spmm,
)


@dataclass(frozen=True, eq=False)
class ShellDecomposition:
    """Ordered disjoint distance shells T_1..T_L of one graph.

    ``shells[l-1]`` is the binary matrix of ordered pairs at distance exactly
    l; the diagonal is empty in every shell.  For a connected graph the shell
    sizes sum to n*(n-1).  Trailing levels past the largest realized distance
    are never materialized.
    """

    n: int
    shells: tuple[SparseMatrix, ...]
    l_max: int
    shell_sizes: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class FusedPropagator:
    """Normalized shells paired with their decay coefficients.

    Every normalized shell is symmetric with non-negative entries and a
    positive diagonal; coefficients[l-1] = (1 - 1/alpha)**l is strictly
    decreasing in l.
    """

    n: int
    normalized_shells: tuple[SparseMatrix, ...]
    coefficients: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=np.float64)
        )
        self.coefficients.flags.writeable = False


def cumulative_matrix(g: SparseGraph, l: int) -> SparseMatrix:
    """Binary reachability-within-l matrix: entry (i, j) iff dist(i, j) <= l.

    Built by BFS truncated at depth l.  The diagonal is always present
    (dist(i, i) = 0), and l = 0 yields the identity.
    """
    if l < 0:
        raise InputError(f"hop count must be non-negative, got {l}")
    if l == 0:
        return SparseMatrix.identity(g.n)
    row_parts: list[np.ndarray] = []
    col_parts: list[np.ndarray] = []
    for sources, block in distance_blocks(g, cap=l):
        local, cols = np.nonzero(block <= l)
        row_parts.append(sources[local])
        col_parts.append(cols.astype(np.int64))
    rows = np.concatenate(row_parts)
    cols = np.concatenate(col_parts)
    offsets = np.zeros(g.n + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(np.bincount(rows, minlength=g.n))
    return SparseMatrix(g.n, g.n, offsets, cols, np.ones(len(cols)))


def shell_decompose(g: SparseGraph, l_cap: int | None = None) -> ShellDecomposition:
    """Partition all reachable ordered pairs into exact-distance shells.

    One BFS per source (vectorized in blocks), bucketed by level; per-source
    buckets are merged in ascending source order so the result is
    deterministic.  ``l_cap`` truncates the decomposition at that depth.
    """
    if l_cap is not None and l_cap < 1:
        raise InputError(f"l_cap must be >= 1 when given, got {l_cap}")
    buckets_rows: dict[int, list[np.ndarray]] = {}
    buckets_cols: dict[int, list[np.ndarray]] = {}
    for sources, block in distance_blocks(g, cap=l_cap):
        finite = np.where(block == UNREACHABLE, -1, block)
        top = int(finite.max())
        for level in range(1, top + 1):
            local, cols = np.nonzero(block == level)
            if len(local) == 0:
                continue
            buckets_rows.setdefault(level, []).append(sources[local])
            buckets_cols.setdefault(level, []).append(cols.astype(np.int64))
    l_max = max(buckets_rows, default=0)
    shells = []
    sizes = []
    for level in range(1, l_max + 1):
        rows = np.concatenate(buckets_rows[level])
        cols = np.concatenate(buckets_cols[level])
        offsets = np.zeros(g.n + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(np.bincount(rows, minlength=g.n))
        shells.append(SparseMatrix(g.n, g.n, offsets, cols, np.ones(len(cols))))
        sizes.append(len(cols))
    return ShellDecomposition(g.n, tuple(shells), l_max, tuple(sizes))


def normalize_shell(t: SparseMatrix) -> SparseMatrix:
    """Symmetric normalization of a binary shell with self-loops added.

    Returns D^{-1/2} (T + I) D^{-1/2} where D is the row-degree diagonal of
    T + I.  The output is symmetric and non-negative with spectral radius
    at most 1; there is no fixed row-sum contract.
    """
    if t.n_rows != t.n_cols:
        raise InputError("shell matrix must be square")
    if not is_symmetric(t):
        raise InputError("shell matrix must be structurally symmetric")
    if t.nnz and not np.all(t.values == 1.0):
        raise InputError("shell matrix must be binary")
    if np.any(t.diagonal() != 0):
        raise InputError("shell matrix must have an empty diagonal")
    n = t.n_rows
    deg = np.diff(t.row_offsets) + 1.0
    inv_sqrt = 1.0 / np.sqrt(deg)
    rows = t.row_entries()
    diag = np.arange(n, dtype=np.int64)
    all_rows = np.concatenate([rows, diag])
    all_cols = np.concatenate([t.col_indices, diag])
    all_vals = np.concatenate(
        [inv_sqrt[rows] * inv_sqrt[t.col_indices], inv_sqrt * inv_sqrt]
    )
    return SparseMatrix.from_coo(all_rows, all_cols, all_vals, (n, n))


def ppr_coefficients(alpha: float, l_max: int) -> np.ndarray:
    """Decay coefficients (1 - 1/alpha)**l for l = 1..l_max."""
    if not np.isfinite(alpha) or alpha <= 1.0:
        raise ConfigError(
            f"alpha must be > 1 (got {alpha}): at alpha = 1 every decay"
            " coefficient (1 - 1/alpha)**l vanishes and the propagator"
            " annihilates all input"
        )
    if l_max < 1:
        raise ConfigError(f"l_max must be >= 1, got {l_max}")
    base = 1.0 - 1.0 / alpha
    return base ** np.arange(1, l_max + 1, dtype=np.float64)


def fuse_shells(decomposition: ShellDecomposition, alpha: float) -> FusedPropagator:
    """Pair each shell's normalization with its decay coefficient."""
    if decomposition.l_max == 0:
        if not np.isfinite(alpha) or alpha <= 1.0:
            raise ConfigError(f"alpha must be > 1, got {alpha}")
        return FusedPropagator(decomposition.n, (), np.empty(0), float(alpha))
    coeffs = ppr_coefficients(alpha, decomposition.l_max)
    normalized = tuple(normalize_shell(t) for t in decomposition.shells)
    return FusedPropagator(decomposition.n, normalized, coeffs, float(alpha))


def fused_propagate(p: FusedPropagator, z: np.ndarray) -> np.ndarray:
    """Apply the fused operator: sum_l theta_l * (That_l @ z), shell by shell.

    Equals the explicit product (sum_l theta_l That_l) @ z without ever
    forming the combined matrix; memory stays proportional to the stored
    shell entries.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] != p.n:
        raise InputError(
            f"shape mismatch: propagator is {p.n}x{p.n}, operand has"
            f" {z.shape[0]} rows"
        )
    out = np.zeros(z.shape, dtype=np.float64)
    for theta, shell in zip(p.coefficients, p.normalized_shells):
        out += theta * spmm(shell, z)
    return out


def shell_degree_profile(d: ShellDecomposition) -> list[float]:
    """Average degree of each shell: entry count divided by node count."""
    return [size / d.n for size in d.shell_sizes]


def shell_union(d: ShellDecomposition) -> SparseMatrix:
    """Binary union of all shells: every reachable ordered pair, i != j."""
    if not d.shells:
        rows = cols = np.empty(0, dtype=np.int64)
    else:
        rows = np.concatenate([t.row_entries() for t in d.shells])
        cols = np.concatenate([t.col_indices for t in d.shells])
    return SparseMatrix.from_coo(rows, cols, np.ones(len(cols)), (d.n, d.n))


def shell_report(g: SparseGraph, l_cap: int | None = None) -> dict:
    """JSON-ready shell summary: sizes, per-layer average degree, diameter."""
    full = shell_decompose(g)
    graph_diameter = full.l_max
    if l_cap is not None:
        if l_cap < 1:
            raise InputError(f"l_cap must be >= 1 when given, got {l_cap}")
        kept = min(l_cap, full.l_max)
        capped = ShellDecomposition(
            full.n, full.shells[:kept], kept, full.shell_sizes[:kept]
        )
    else:
        capped = full
    return {
        "n": g.n,
        "l_max": capped.l_max,
        "shell_sizes": list(capped.shell_sizes),
        "avg_degree_per_layer": shell_degree_profile(capped),
        "diameter": graph_diameter,
    }
