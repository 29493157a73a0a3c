import numpy as np
import pytest

from shellprop import (
    ConfigError,
    FusedPropagator,
    InputError,
    SparseMatrix,
    build_graph,
    cumulative_matrix,
    fuse_shells,
    fused_propagate,
    normalize_shell,
    ppr_coefficients,
    shell_decompose,
    shell_degree_profile,
    shell_report,
    shell_union,
)

from helpers import (
    complete_graph,
    dense_adjacency,
    dense_fused,
    dense_shells,
    dense_sym_norm,
    floyd_warshall,
    path_graph,
    random_connected_graph,
    random_graph,
    star_graph,
)


def entries(m: SparseMatrix) -> set[tuple[int, int]]:
    return set(zip(m.row_entries().tolist(), m.col_indices.tolist()))


class TestCumulativeMatrix:
    def test_path_one_hop(self):
        c1 = cumulative_matrix(path_graph(3), 1)
        assert entries(c1) == {(0, 0), (1, 1), (2, 2), (0, 1), (1, 0), (1, 2), (2, 1)}

    def test_path_two_hops_saturates(self):
        c2 = cumulative_matrix(path_graph(3), 2)
        assert c2.nnz == 9

    def test_zero_hops_is_identity(self):
        c0 = cumulative_matrix(path_graph(3), 0)
        assert np.array_equal(c0.to_dense(), np.eye(3))

    def test_negative_hops(self):
        with pytest.raises(InputError):
            cumulative_matrix(path_graph(3), -1)

    @pytest.mark.parametrize("seed", range(6))
    def test_off_diagonal_matches_summed_powers(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 41))
        g = random_connected_graph(seed, n, float(rng.uniform(0.1, 0.4)))
        a = dense_adjacency(g)
        running = np.zeros_like(a)
        power = np.eye(g.n)
        for level in range(1, 6):
            power = power @ a
            running += power
            got = cumulative_matrix(g, level).to_dense()
            np.fill_diagonal(got, 0)
            want = (running > 0).astype(float)
            np.fill_diagonal(want, 0)
            assert np.array_equal(got, want)


class TestShellDecompose:
    def test_path(self):
        d = shell_decompose(path_graph(3))
        assert d.l_max == 2
        assert entries(d.shells[0]) == {(0, 1), (1, 0), (1, 2), (2, 1)}
        assert entries(d.shells[1]) == {(0, 2), (2, 0)}

    def test_triangle_single_shell(self):
        d = shell_decompose(complete_graph(3))
        assert d.l_max == 1
        assert d.shell_sizes == (6,)

    def test_star(self):
        d = shell_decompose(star_graph(3))
        assert d.shell_sizes == (6, 6)
        assert sum(d.shell_sizes) == 4 * 3

    def test_cap_truncates(self):
        d = shell_decompose(path_graph(5), l_cap=2)
        assert d.l_max == 2
        assert len(d.shells) == 2

    def test_cap_beyond_diameter_drops_trailing_levels(self):
        d = shell_decompose(path_graph(3), l_cap=10)
        assert d.l_max == 2

    def test_bad_cap(self):
        with pytest.raises(InputError):
            shell_decompose(path_graph(3), l_cap=0)

    def test_edgeless_graph_has_no_shells(self):
        d = shell_decompose(build_graph([], 4))
        assert d.l_max == 0
        assert d.shells == ()

    @pytest.mark.parametrize("seed", range(8))
    def test_shells_match_distance_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 61))
        g = random_graph(seed + 11, n, float(rng.uniform(0.05, 0.4)))
        oracle = floyd_warshall(g)
        d = shell_decompose(g)
        seen: set[tuple[int, int]] = set()
        for level, shell in enumerate(d.shells, start=1):
            got = entries(shell)
            want = set(zip(*np.nonzero(oracle == level)))
            assert got == {(int(i), int(j)) for i, j in want}
            assert not (got & seen)  # pairwise disjoint
            seen |= got

    @pytest.mark.parametrize("seed", range(5))
    def test_connected_cover_count(self, seed):
        g = random_connected_graph(seed + 100, 40, 0.15)
        d = shell_decompose(g)
        assert sum(d.shell_sizes) == g.n * (g.n - 1)

    def test_consistent_with_cumulative_differences(self):
        g = random_connected_graph(3, 25, 0.15)
        d = shell_decompose(g)
        prev = cumulative_matrix(g, 0)
        for level, shell in enumerate(d.shells, start=1):
            cur = cumulative_matrix(g, level)
            assert entries(cur) - entries(prev) == entries(shell)
            prev = cur

    def test_permutation_equivariance(self):
        g = random_connected_graph(9, 15, 0.25)
        rng = np.random.default_rng(0)
        perm = rng.permutation(g.n)
        relabeled = build_graph(
            [(perm[u], perm[v]) for u in range(g.n) for v in g.neighbors(u) if u < v],
            g.n,
        )
        d, dp = shell_decompose(g), shell_decompose(relabeled)
        assert d.l_max == dp.l_max
        for shell, shell_p in zip(d.shells, dp.shells):
            mapped = {(int(perm[i]), int(perm[j])) for i, j in entries(shell)}
            assert mapped == entries(shell_p)


class TestNormalizeShell:
    def test_empty_shell_becomes_identity(self):
        empty = SparseMatrix.from_coo([], [], [], (2, 2))
        assert np.array_equal(normalize_shell(empty).to_dense(), np.eye(2))

    def test_single_edge_shell(self):
        t = shell_decompose(complete_graph(2)).shells[0]
        assert np.allclose(normalize_shell(t).to_dense(), np.full((2, 2), 0.5))

    def test_path_first_shell_hand_values(self):
        t1 = shell_decompose(path_graph(3)).shells[0]
        got = normalize_shell(t1).to_dense()
        assert got[0, 1] == pytest.approx(1.0 / np.sqrt(6.0), abs=1e-15)
        assert np.allclose(np.diag(got), [0.5, 1.0 / 3.0, 0.5])

    def test_asymmetric_input_rejected(self):
        with pytest.raises(InputError):
            normalize_shell(SparseMatrix.from_coo([0], [1], [1.0], (2, 2)))

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(InputError):
            normalize_shell(SparseMatrix.identity(2))

    @pytest.mark.parametrize("seed", range(5))
    def test_symmetric_and_spectral_radius_bounded(self, seed):
        g = random_connected_graph(seed + 20, 20, 0.2)
        for shell in shell_decompose(g).shells:
            dense = normalize_shell(shell).to_dense()
            assert np.max(np.abs(dense - dense.T)) < 1e-12
            # power iteration for the dominant eigenvalue
            v = np.random.default_rng(0).standard_normal(g.n)
            for _ in range(400):
                v = dense @ v
                v /= np.linalg.norm(v)
            top = float(v @ dense @ v)
            assert abs(top) <= 1.0 + 1e-9

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_dense_oracle(self, seed):
        g = random_connected_graph(seed + 40, 15, 0.25)
        for shell, oracle_shell in zip(shell_decompose(g).shells, dense_shells(g)):
            got = normalize_shell(shell).to_dense()
            assert np.max(np.abs(got - dense_sym_norm(oracle_shell))) < 1e-12


class TestPprCoefficients:
    def test_alpha_two(self):
        assert np.allclose(ppr_coefficients(2, 3), [0.5, 0.25, 0.125])
        assert ppr_coefficients(2, 3)[2] == 0.125  # exact powers of two

    def test_alpha_ten(self):
        assert ppr_coefficients(10, 2) == pytest.approx([0.9, 0.81])

    def test_alpha_one_rejected(self):
        with pytest.raises(ConfigError):
            ppr_coefficients(1, 3)
        with pytest.raises(ConfigError):
            ppr_coefficients(0.5, 3)

    def test_strictly_decreasing(self):
        for alpha in (1.5, 2.0, 5.0, 10.0):
            c = ppr_coefficients(alpha, 8)
            assert np.all(np.diff(c) < 0)
            assert np.all((c > 0) & (c < 1))
            assert np.allclose(c, [(1 - 1 / alpha) ** l for l in range(1, 9)])


class TestFusedPropagate:
    def test_single_shell_identity_coefficient(self):
        t1 = shell_decompose(complete_graph(2)).shells[0]
        that = normalize_shell(t1)
        p = FusedPropagator(2, (that,), np.array([1.0]), 2.0)
        assert np.allclose(fused_propagate(p, np.eye(2)), that.to_dense())

    def test_path_alpha_two_matches_dense_oracle(self):
        g = path_graph(3)
        p = fuse_shells(shell_decompose(g), 2.0)
        got = fused_propagate(p, np.eye(3))
        assert np.max(np.abs(got - dense_fused(g, 2.0))) < 1e-12

    def test_zero_input(self):
        p = fuse_shells(shell_decompose(path_graph(4)), 2.0)
        assert np.array_equal(fused_propagate(p, np.zeros((4, 3))), np.zeros((4, 3)))

    def test_shape_mismatch(self):
        p = fuse_shells(shell_decompose(path_graph(4)), 2.0)
        with pytest.raises(InputError):
            fused_propagate(p, np.zeros((5, 2)))

    @pytest.mark.parametrize("seed", range(4))
    def test_equals_explicit_dense_product(self, seed):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(seed + 60, 20, 0.2)
        p = fuse_shells(shell_decompose(g), 5.0)
        z = rng.standard_normal((20, 7))
        assert np.max(np.abs(fused_propagate(p, z) - dense_fused(g, 5.0) @ z)) < 1e-10

    def test_linearity(self):
        rng = np.random.default_rng(1)
        g = random_connected_graph(70, 18, 0.2)
        p = fuse_shells(shell_decompose(g), 2.0)
        z1, z2 = rng.standard_normal((2, 18, 5))
        a, b = 0.7, -2.3
        lhs = fused_propagate(p, a * z1 + b * z2)
        rhs = a * fused_propagate(p, z1) + b * fused_propagate(p, z2)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_permutation_equivariance(self):
        g = random_connected_graph(71, 12, 0.3)
        rng = np.random.default_rng(2)
        perm = rng.permutation(g.n)
        relabeled = build_graph(
            [(perm[u], perm[v]) for u in range(g.n) for v in g.neighbors(u) if u < v],
            g.n,
        )
        z = rng.standard_normal((g.n, 4))
        out = fused_propagate(fuse_shells(shell_decompose(g), 2.0), z)
        zp = np.empty_like(z)
        zp[perm] = z
        outp = fused_propagate(fuse_shells(shell_decompose(relabeled), 2.0), zp)
        assert np.max(np.abs(outp[perm] - out)) < 1e-12


class TestShellSummaries:
    def test_profile_path(self):
        d = shell_decompose(path_graph(3))
        assert shell_degree_profile(d) == pytest.approx([4 / 3, 2 / 3])

    def test_profile_triangle(self):
        assert shell_degree_profile(shell_decompose(complete_graph(3))) == [2.0]

    def test_profile_star(self):
        assert shell_degree_profile(shell_decompose(star_graph(3))) == [1.5, 1.5]

    def test_union_covers_reachable_pairs(self):
        g = random_connected_graph(80, 30, 0.15)
        union = shell_union(shell_decompose(g))
        assert union.nnz == g.n * (g.n - 1)
        assert float(union.values.sum()) == g.n * (g.n - 1)

    def test_report_fields(self):
        report = shell_report(path_graph(3))
        assert report == {
            "n": 3,
            "l_max": 2,
            "shell_sizes": [4, 2],
            "avg_degree_per_layer": pytest.approx([4 / 3, 2 / 3]),
            "diameter": 2,
        }

    def test_report_cap_keeps_true_diameter(self):
        report = shell_report(path_graph(5), l_cap=1)
        assert report["l_max"] == 1
        assert len(report["shell_sizes"]) == 1
        assert report["diameter"] == 4
