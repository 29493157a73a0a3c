"""Aggregation-redundancy diagnostics and classical propagators.

Two measurements drive everything here.  The aggregation count of a matrix
at depth l is the mean total mass of its l-th power, (1/N) * sum_ij M^l_ij.
The self-attention score at depth k is the mean fraction of each row's mass
sitting on the diagonal of M^k; for the classical symmetric and random-walk
propagators of a connected graph it converges to 1/N as k grows, which is
what the trajectory helpers verify numerically.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, InputError, NumericError, ResourceError
from .graph import SparseGraph, SparseMatrix, adjacency_matrix, diameter, is_connected
from .shells import ShellDecomposition, fuse_shells, normalize_shell

_DENSE_CAP = 2000
#: float64 loses walk-count exactness past 2**53; n**(l+2) bounds every
#: intermediate value of a binary dense power, so that is the rejection test.
_WALK_COUNT_LIMIT_BITS = 53

SYM_NORM = "sym_norm"
RW_NORM = "rw_norm"
RESIDUAL = "residual"
FUSED_SHELL = "fused_shell"
RAW_ADJACENCY = "raw_adjacency"


@dataclass(frozen=True, eq=False)
class Propagator:
    """A named n x n non-negative propagation matrix."""

    matrix: SparseMatrix
    kind: str
    beta: float | None = None


@dataclass(frozen=True, eq=False)
class MetricReport:
    """Self-attention trajectory plus its gap to the 1/N limit."""

    avg_nat: float
    sas_trajectory: list[tuple[int, float]]
    limit_gap: float


@dataclass(frozen=True, eq=False)
class AggregationBoundsVerdict:
    """Exact aggregation count at the diameter, checked against both bounds."""

    n: int
    diameter: int
    walk_total: int
    avg_nat: float
    lower_bound: float
    upper_bound: float
    lower_ok: bool
    upper_ok: bool

    @property
    def holds(self) -> bool:
        return self.lower_ok and self.upper_ok


def sym_norm_propagator(g: SparseGraph) -> Propagator:
    """Symmetric normalization of the self-looped adjacency.

    Entry (i, j) of the matrix is 1/sqrt(d_i * d_j) where d is the degree
    in A + I; the diagonal is 1/d_i.
    """
    return Propagator(normalize_shell(adjacency_matrix(g)), SYM_NORM)


def rw_norm_propagator(g: SparseGraph) -> Propagator:
    """Row-stochastic normalization of the self-looped adjacency."""
    deg = g.degrees + 1.0
    rows = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
    diag = np.arange(g.n, dtype=np.int64)
    all_rows = np.concatenate([rows, diag])
    all_cols = np.concatenate([g.col_indices, diag])
    all_vals = 1.0 / deg[all_rows]
    m = SparseMatrix.from_coo(all_rows, all_cols, all_vals, (g.n, g.n))
    return Propagator(m, RW_NORM)


def residual_propagator(p: Propagator, beta: float) -> Propagator:
    """Convex combination beta * P + (1 - beta) * I of a propagator."""
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must be strictly inside (0, 1), got {beta}")
    m = p.matrix
    n = m.n_rows
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([m.row_entries(), diag])
    cols = np.concatenate([m.col_indices, diag])
    vals = np.concatenate([beta * m.values, np.full(n, 1.0 - beta)])
    merged = SparseMatrix.from_coo(rows, cols, vals, (n, n), sum_duplicates=True)
    return Propagator(merged, RESIDUAL, beta=beta)


def raw_adjacency_propagator(g: SparseGraph) -> Propagator:
    return Propagator(adjacency_matrix(g), RAW_ADJACENCY)


def fused_shell_propagator(
    decomposition: ShellDecomposition, alpha: float
) -> Propagator:
    """The fused shell operator assembled into one explicit sparse matrix.

    Shells are disjoint off the diagonal, so only the per-shell self-loop
    terms overlap and get summed.  Used for measuring the fused operator;
    training-path propagation stays shell by shell.
    """
    fp = fuse_shells(decomposition, alpha)
    n = fp.n
    if not fp.normalized_shells:
        empty = np.empty(0, dtype=np.int64)
        m = SparseMatrix.from_coo(empty, empty, np.empty(0), (n, n))
        return Propagator(m, FUSED_SHELL)
    rows = np.concatenate([s.row_entries() for s in fp.normalized_shells])
    cols = np.concatenate([s.col_indices for s in fp.normalized_shells])
    vals = np.concatenate(
        [
            theta * s.values
            for theta, s in zip(fp.coefficients, fp.normalized_shells)
        ]
    )
    merged = SparseMatrix.from_coo(rows, cols, vals, (n, n), sum_duplicates=True)
    return Propagator(merged, FUSED_SHELL)


def _as_matrix(a: SparseGraph | SparseMatrix) -> SparseMatrix:
    return adjacency_matrix(a) if isinstance(a, SparseGraph) else a


def _is_binary(m: SparseMatrix) -> bool:
    return m.nnz == 0 or bool(np.all(m.values == 1.0))


def _exact_power_total(dense_int: np.ndarray, l: int) -> int:
    """Total of all entries of an integer matrix power, in exact arithmetic."""
    n = dense_int.shape[0]
    m = np.eye(n, dtype=object)
    a = dense_int.astype(object)
    for _ in range(l):
        m = m @ a
    return int(m.sum())


def avg_nat(a: SparseGraph | SparseMatrix, l: int, exact: bool = False) -> float:
    """Mean total mass of the l-th matrix power: (1/N) * sum_ij M^l_ij.

    Evaluated by dense matrix powers, which caps the node count at 2000.
    Binary matrices count walks, and walk counts outgrow the 2**53 float64
    integer range once n**(l+2) does (around 55 nodes at diameter-scale
    depths); pass ``exact=True`` to switch to big-integer accumulation there.
    """
    m = _as_matrix(a)
    if m.n_rows != m.n_cols:
        raise InputError("avg_nat requires a square matrix")
    if l < 1:
        raise InputError(f"depth must be >= 1, got {l}")
    n = m.n_rows
    if n > _DENSE_CAP:
        raise ResourceError(
            f"avg_nat uses dense matrix powers and supports n <= {_DENSE_CAP};"
            f" got n = {n}"
        )
    binary = _is_binary(m)
    if exact:
        if not binary:
            raise InputError("exact mode requires a binary matrix")
        total = _exact_power_total(
            np.rint(m.to_dense()).astype(np.int64), l
        )
        return float(Fraction(total, n))
    if binary and (l + 2) * np.log2(max(n, 2)) > _WALK_COUNT_LIMIT_BITS:
        raise NumericError(
            f"walk counts for n = {n}, depth {l} can exceed 2**53 and lose"
            " exactness in float64; re-run with exact=True"
        )
    power = np.linalg.matrix_power(m.to_dense(), l)
    return float(power.sum() / n)


def _row_block_size(n: int) -> int:
    return max(1, min(n, 8_000_000 // max(n, 1)))


def sas(a: SparseMatrix | Propagator, k: int) -> float:
    """Mean diagonal mass fraction of the k-th matrix power.

    Rows of M^k are computed by iterated sparse products in blocks, so the
    full power is never materialized for large matrices.
    """
    m = a.matrix if isinstance(a, Propagator) else a
    if m.n_rows != m.n_cols:
        raise InputError("sas requires a square matrix")
    if k < 1:
        raise InputError(f"depth must be >= 1, got {k}")
    n = m.n_rows
    mt = m.transpose().to_scipy()
    total = 0.0
    block = _row_block_size(n)
    for start in range(0, n, block):
        idx = np.arange(start, min(start + block, n))
        w = np.zeros((n, len(idx)))
        w[idx, np.arange(len(idx))] = 1.0
        for _ in range(k):
            w = mt @ w
        diag = w[idx, np.arange(len(idx))]
        row_sums = w.sum(axis=0)
        if not np.all(np.isfinite(row_sums)):
            bad = int(idx[np.flatnonzero(~np.isfinite(row_sums))[0]])
            raise NumericError(f"row {bad} of the depth-{k} power is non-finite")
        if np.any(row_sums == 0):
            bad = int(idx[np.flatnonzero(row_sums == 0)[0]])
            raise NumericError(f"row {bad} of the depth-{k} power sums to zero")
        total += float((diag / row_sums).sum())
    return total / n


def sas_trajectory(
    p: Propagator | SparseMatrix, k_max: int, stop_tol: float | None = None
) -> MetricReport:
    """Self-attention scores at every depth 1..k_max plus the gap to 1/N.

    ``stop_tol`` ends the sweep early once the score is within that distance
    of 1/N, recording the trajectory up to the entry point.
    """
    m = p.matrix if isinstance(p, Propagator) else p
    if m.n_rows != m.n_cols:
        raise InputError("sas_trajectory requires a square matrix")
    if k_max < 1:
        raise InputError(f"k_max must be >= 1, got {k_max}")
    n = m.n_rows
    if n > _DENSE_CAP:
        raise ResourceError(
            f"sas_trajectory tracks the dense power and supports n <="
            f" {_DENSE_CAP}; got n = {n}"
        )
    a = m.to_scipy()
    power = np.eye(n)
    trajectory: list[tuple[int, float]] = []
    target = 1.0 / n
    for k in range(1, k_max + 1):
        power = a @ power
        row_sums = power.sum(axis=1)
        if not np.all(np.isfinite(row_sums)):
            bad = int(np.flatnonzero(~np.isfinite(row_sums))[0])
            raise NumericError(f"row {bad} of the depth-{k} power is non-finite")
        if np.any(row_sums == 0):
            bad = int(np.flatnonzero(row_sums == 0)[0])
            raise NumericError(f"row {bad} of the depth-{k} power sums to zero")
        score = float(np.mean(np.einsum("ii->i", power) / row_sums))
        trajectory.append((k, score))
        if stop_tol is not None and abs(score - target) < stop_tol:
            break
    gap = abs(trajectory[-1][1] - target)
    return MetricReport(
        avg_nat=float(power.sum() / n), sas_trajectory=trajectory, limit_gap=gap
    )


def aggregation_bounds_check(g: SparseGraph) -> AggregationBoundsVerdict:
    """Check N-1 <= avg_nat(A, diameter) < 2**(N-2) with exact arithmetic.

    Intended for brute-force scale (n <= 20 or so); walk totals are counted
    in big integers, so the comparisons are exact.  The strict upper bound
    does not hold for every connected graph (chains exceed it), and the
    verdict reports each bound separately.
    """
    if not is_connected(g):
        raise InputError("aggregation_bounds_check requires a connected graph")
    diam = diameter(g)
    dense = np.rint(adjacency_matrix(g).to_dense()).astype(np.int64)
    total = _exact_power_total(dense, diam)
    value = Fraction(total, g.n)
    upper = Fraction(2) ** (g.n - 2)
    return AggregationBoundsVerdict(
        n=g.n,
        diameter=diam,
        walk_total=total,
        avg_nat=float(value),
        lower_bound=float(g.n - 1),
        upper_bound=float(upper),
        lower_ok=value >= g.n - 1,
        upper_ok=value < upper,
    )
