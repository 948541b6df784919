"""Graph construction, operator spectra, and graph diagnostics."""

import numpy as np
import pytest

from chebgibbs.graph_core import (
    build_graph,
    degrees,
    diffusion_distance,
    estimate_lambda_max,
    node_homophily,
    read_edge_file,
    renormalized_adjacency,
    scaled_laplacian,
    select_gso,
    spectral_gap,
    sym_norm_adjacency,
    sym_norm_laplacian,
)

RT2 = np.sqrt(2.0)


def random_connected_graph(rng, n, extra_edges=None):
    """Spanning path plus random extra edges, guaranteed connected."""
    if extra_edges is None:
        extra_edges = 2 * n
    edges = [(i, i + 1) for i in range(n - 1)]
    for _ in range(extra_edges):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.append((min(u, v), max(u, v)))
    with pytest.warns(UserWarning):
        return build_graph(n, edges)


class TestBuildGraph:
    def test_smallest_nonempty_graph(self):
        g = build_graph(2, [(0, 1)])
        assert g.n == 2 and g.num_edges == 1

    def test_duplicates_and_self_loops_dropped_with_warning(self):
        with pytest.warns(UserWarning, match="1 self-loop.*1 duplicate|1 duplicate.*1 self-loop"):
            g = build_graph(3, [(0, 1), (1, 0), (2, 2)])
        assert g.num_edges == 1

    def test_index_out_of_range(self):
        with pytest.raises(ValueError, match="index out of range"):
            build_graph(3, [(0, 5)])

    def test_empty_edge_list(self):
        g = build_graph(4, [])
        assert g.num_edges == 0
        assert degrees(g).tolist() == [0, 0, 0, 0]


class TestEdgeFile:
    def test_read_with_comments(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("# header\n0 1\n\n1 2\n")
        assert read_edge_file(path) == [(0, 1), (1, 2)]

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("0 1\nx y\n")
        with pytest.raises(ValueError, match="edges.txt:2"):
            read_edge_file(path)


class TestNormalizedOperators:
    def test_single_edge_adjacency(self):
        a = sym_norm_adjacency(build_graph(2, [(0, 1)]))
        assert np.allclose(a.to_dense(), [[0, 1], [1, 0]])

    def test_triangle_adjacency(self):
        a = sym_norm_adjacency(build_graph(3, [(0, 1), (1, 2), (0, 2)]))
        dense = a.to_dense()
        off = dense[~np.eye(3, dtype=bool)]
        assert np.allclose(off, 0.5) and np.allclose(np.diag(dense), 0.0)

    def test_path_adjacency(self):
        a = sym_norm_adjacency(build_graph(3, [(0, 1), (1, 2)]))
        dense = a.to_dense()
        assert dense[0, 1] == pytest.approx(1 / RT2, abs=1e-15)
        assert dense[1, 2] == pytest.approx(1 / RT2, abs=1e-15)

    def test_single_edge_laplacian_spectrum(self):
        L = sym_norm_laplacian(build_graph(2, [(0, 1)]))
        assert np.allclose(np.linalg.eigvalsh(L.to_dense()), [0.0, 2.0])

    def test_triangle_laplacian_has_zero_mode(self):
        L = sym_norm_laplacian(build_graph(3, [(0, 1), (1, 2), (0, 2)]))
        assert np.linalg.eigvalsh(L.to_dense())[0] == pytest.approx(0.0, abs=1e-12)

    def test_empty_graph_laplacian_is_identity(self):
        L = sym_norm_laplacian(build_graph(3, []))
        assert np.array_equal(L.to_dense(), np.eye(3))

    def test_renormalized_single_edge(self):
        a = renormalized_adjacency(build_graph(2, [(0, 1)]), eta=1.0)
        assert np.allclose(a.to_dense(), 0.5 * np.ones((2, 2)))

    def test_renormalized_regular_graph(self):
        g = build_graph(3, [(0, 1), (1, 2), (0, 2)])  # 2-regular
        a = renormalized_adjacency(g, eta=1.0)
        expect = (np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]]) + np.eye(3)) / 3.0
        assert np.allclose(a.to_dense(), expect)

    def test_renormalized_empty_graph_is_identity(self):
        a = renormalized_adjacency(build_graph(3, []), eta=1.0)
        assert np.allclose(a.to_dense(), np.eye(3))

    def test_negative_eta_rejected(self):
        with pytest.raises(ValueError, match="eta"):
            renormalized_adjacency(build_graph(2, [(0, 1)]), eta=-0.5)


class TestScaledLaplacian:
    def test_lambda_max_two_gives_minus_adjacency(self):
        g = build_graph(4, [(0, 1), (1, 2), (2, 3)])
        L = sym_norm_laplacian(g)
        a = sym_norm_adjacency(g)
        scaled = scaled_laplacian(L, 2.0)
        assert np.allclose(scaled.to_dense(), -a.to_dense(), atol=1e-15)

    def test_single_edge_spectrum(self):
        L = sym_norm_laplacian(build_graph(2, [(0, 1)]))
        scaled = scaled_laplacian(L, 2.0)
        assert np.allclose(np.linalg.eigvalsh(scaled.to_dense()), [-1.0, 1.0])

    def test_identity_laplacian_maps_to_zero(self):
        L = sym_norm_laplacian(build_graph(3, []))
        assert np.allclose(scaled_laplacian(L, 2.0).to_dense(), 0.0)

    @pytest.mark.parametrize("bad", [0.0, -1.0, 2.5])
    def test_invalid_lambda_max(self, bad):
        L = sym_norm_laplacian(build_graph(2, [(0, 1)]))
        with pytest.raises(ValueError, match="lambda_max"):
            scaled_laplacian(L, bad)


class TestLambdaMaxEstimate:
    def test_single_edge(self):
        L = sym_norm_laplacian(build_graph(2, [(0, 1)]))
        assert estimate_lambda_max(L) == pytest.approx(2.0, abs=1e-5)

    def test_identity(self):
        L = sym_norm_laplacian(build_graph(3, []))
        assert estimate_lambda_max(L) == pytest.approx(1.0, abs=1e-9)

    def test_triangle(self):
        L = sym_norm_laplacian(build_graph(3, [(0, 1), (1, 2), (0, 2)]))
        assert estimate_lambda_max(L) == pytest.approx(1.5, abs=1e-5)

    def test_matches_dense_oracle_on_random_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            g = random_connected_graph(rng, int(rng.integers(4, 32)))
            L = sym_norm_laplacian(g)
            exact = np.linalg.eigvalsh(L.to_dense()).max()
            assert estimate_lambda_max(L) == pytest.approx(exact, abs=1e-4)


class TestHomophily:
    def test_uniform_labels(self):
        g = build_graph(3, [(0, 1), (1, 2), (0, 2)])
        rep = node_homophily(g, [1, 1, 1])
        assert rep.h == 1.0 and rep.n_isolated == 0

    def test_alternating_path(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        assert node_homophily(g, [0, 1, 0]).h == 0.0

    def test_isolated_nodes_excluded(self):
        g = build_graph(4, [(0, 1)])
        rep = node_homophily(g, [0, 0, 1, 1])
        assert rep.h == 1.0
        assert rep.n_isolated == 2
        assert np.isnan(rep.per_node[2]) and np.isnan(rep.per_node[3])

    def test_h_is_mean_of_per_node(self):
        rng = np.random.default_rng(3)
        g = random_connected_graph(rng, 20)
        labels = rng.integers(0, 3, size=20)
        rep = node_homophily(g, labels)
        live = ~np.isnan(rep.per_node)
        assert rep.h == pytest.approx(rep.per_node[live].mean(), abs=1e-15)
        assert np.all((rep.per_node[live] >= 0) & (rep.per_node[live] <= 1))

    def test_h_equals_one_iff_all_neighbors_agree(self):
        g = build_graph(4, [(0, 1), (2, 3)])
        assert node_homophily(g, [5, 5, 7, 7]).h == 1.0
        assert node_homophily(g, [5, 5, 7, 8]).h < 1.0

    def test_mask_restricts_known_labels(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        # node 2's label is unknown: node 1 compares only against node 0
        rep = node_homophily(g, [0, 0, 1], mask=[0, 1])
        assert rep.h == 1.0

    def test_all_isolated_is_an_error(self):
        with pytest.raises(ValueError, match="homophily undefined"):
            node_homophily(build_graph(3, []), [0, 1, 2])

    def test_wrong_label_length(self):
        with pytest.raises(ValueError, match="length"):
            node_homophily(build_graph(2, [(0, 1)]), [0, 1, 2])


class TestSelectGso:
    def test_homophilous_keeps_sign(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        s = select_gso(g, 0.83)
        assert np.allclose(s.to_dense(), renormalized_adjacency(g).to_dense())

    def test_heterophilous_flips_sign(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        s = select_gso(g, 0.11)
        assert np.allclose(s.to_dense(), -renormalized_adjacency(g).to_dense())

    def test_tie_resolves_homophilous(self):
        g = build_graph(2, [(0, 1)])
        s = select_gso(g, 0.5)
        assert np.allclose(s.to_dense(), renormalized_adjacency(g).to_dense())


class TestSpectralGap:
    def test_single_edge_spectrum_gap(self):
        assert spectral_gap([0.0, 2.0], 1) == 2.0

    def test_repeated_eigenvalue(self):
        assert spectral_gap([0.0, 1.5, 1.5], 2) == 0.0

    def test_simple_arithmetic(self):
        assert spectral_gap([0.0, 1.0, 2.0], 1) == 1.0

    def test_j_zero_rejected(self):
        with pytest.raises(ValueError, match="gap index"):
            spectral_gap([0.0, 1.0], 0)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError, match="ascending"):
            spectral_gap([1.0, 0.0], 1)


class TestDiffusionDistance:
    def test_same_node_is_zero(self):
        g = build_graph(2, [(0, 1)])
        H = np.random.default_rng(0).standard_normal((2, 2))
        assert diffusion_distance(H, g, 0, 0) == 0.0

    def test_single_edge_adjacency_rows(self):
        g = build_graph(2, [(0, 1)])
        H = sym_norm_adjacency(g).to_dense()
        assert diffusion_distance(H, g, 0, 1) == pytest.approx(2.0, abs=1e-14)

    def test_identical_rows_are_distance_zero(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        H = np.ones((3, 3))
        assert diffusion_distance(H, g, 0, 2) == 0.0

    def test_no_edges_rejected(self):
        with pytest.raises(ValueError, match="stationary density undefined"):
            diffusion_distance(np.eye(3), build_graph(3, []), 0, 1)

    def test_pseudometric_on_random_graphs(self):
        rng = np.random.default_rng(11)
        for _ in range(3):
            n = int(rng.integers(4, 17))
            g = random_connected_graph(rng, n, extra_edges=n)
            H = rng.standard_normal((n, n))
            D = np.zeros((n, n))
            for u in range(n):
                for v in range(n):
                    D[u, v] = diffusion_distance(H, g, u, v)
            assert np.all(D >= 0)
            assert np.allclose(D, D.T, atol=1e-12)
            assert np.allclose(np.diag(D), 0.0)
            # exhaustive triangle inequality over all triples
            lhs = D[:, None, :]  # d(u, w)
            rhs = D[:, :, None] + D[None, :, :]  # d(u, v) + d(v, w)
            assert np.all(lhs <= rhs + 1e-9)


class TestSpectraInvariants:
    def test_operator_spectra_within_bounds(self):
        rng = np.random.default_rng(42)
        for _ in range(8):
            n = int(rng.integers(4, 65))
            g = random_connected_graph(rng, n)
            lam_l = np.linalg.eigvalsh(sym_norm_laplacian(g).to_dense())
            assert lam_l.min() >= -1e-9 and lam_l.max() <= 2.0 + 1e-9
            for op in (sym_norm_adjacency(g), renormalized_adjacency(g)):
                lam = np.linalg.eigvalsh(op.to_dense())
                assert lam.min() >= -1.0 - 1e-9 and lam.max() <= 1.0 + 1e-9

    def test_exact_lambda_max_scales_spectrum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            g = random_connected_graph(rng, int(rng.integers(4, 33)))
            L = sym_norm_laplacian(g)
            exact = float(np.linalg.eigvalsh(L.to_dense()).max())
            lam = np.linalg.eigvalsh(scaled_laplacian(L, exact).to_dense())
            assert abs(lam.max() - 1.0) <= 1e-9
            assert lam.min() >= -1.0 - 1e-9

    def test_select_gso_spectrum_symmetric_interval(self):
        rng = np.random.default_rng(9)
        g = random_connected_graph(rng, 24)
        for h in (0.9, 0.1):
            lam = np.linalg.eigvalsh(select_gso(g, h).to_dense())
            assert lam.min() >= -1.0 - 1e-9 and lam.max() <= 1.0 + 1e-9


class TestOperatorPlumbing:
    def test_dense_dump_and_cap(self, tmp_path):
        a = renormalized_adjacency(build_graph(3, [(0, 1)]))
        path = tmp_path / "op.csv"
        a.dump_dense_csv(path)
        assert np.allclose(np.loadtxt(path, delimiter=","), a.to_dense())
        big = renormalized_adjacency(build_graph(300, []))
        with pytest.raises(ValueError, match="restricted"):
            big.dump_dense_csv(tmp_path / "big.csv")

    def test_entries_are_symmetric(self):
        a = sym_norm_adjacency(build_graph(3, [(0, 1), (1, 2)]))
        rows, cols, vals = a.entries()
        pairs = {(r, c): v for r, c, v in zip(rows, cols, vals)}
        for (r, c), v in pairs.items():
            assert pairs[(c, r)] == v
