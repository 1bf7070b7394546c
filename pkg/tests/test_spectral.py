import numpy as np
import pytest

from hodgelet.errors import ContractError
from hodgelet.spectral import (
    EigenBlock,
    FilterBank,
    default_filter_bank,
    eigendecompose_hodge,
    evaluate_filter,
    filter_responses,
    mexican_hat,
    wavelet_coefficients,
)
from hodgelet.topology import build_complex, hodge_laplacian


def four_cycle():
    return build_complex(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


def filled_triangle():
    return build_complex(3, [(0, 1), (1, 2), (0, 2)])


def random_complex(rng, n, p=0.45):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return build_complex(n, edges)


class TestEigendecomposeHodge:
    def test_four_cycle_blocks(self):
        spec = eigendecompose_hodge(four_cycle())
        # brute-force eigensolve of the 4x4 vertex Laplacian gives {0, 2, 2, 4}
        assert np.allclose(spec.vertex_coexact.eigenvalues, [2.0, 2.0, 4.0])
        assert spec.vertex_harmonic.dim == 1
        assert spec.edge_exact.dim == 3
        assert np.allclose(spec.edge_exact.eigenvalues, [2.0, 2.0, 4.0])
        assert spec.edge_coexact.dim == 0
        assert spec.edge_harmonic.dim == 1

    def test_filled_triangle_blocks(self):
        spec = eigendecompose_hodge(filled_triangle())
        assert np.allclose(spec.edge_exact.eigenvalues, [3.0, 3.0])
        assert np.allclose(spec.edge_coexact.eigenvalues, [3.0])
        assert spec.edge_harmonic.dim == 0

    def test_single_vertex(self):
        spec = eigendecompose_hodge(build_complex(1, []))
        assert spec.vertex_harmonic.vectors.shape == (1, 1)
        assert abs(abs(spec.vertex_harmonic.vectors[0, 0]) - 1.0) < 1e-14
        assert spec.vertex_coexact.dim == 0
        assert spec.edge_exact.dim == 0

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ContractError):
            eigendecompose_hodge(filled_triangle(), zero_tolerance=-1.0)

    def test_block_orthonormal_completeness(self):
        rng = np.random.default_rng(3)
        for _ in range(8):
            cx = random_complex(rng, int(rng.integers(3, 10)))
            spec = eigendecompose_hodge(cx)
            vertex = np.hstack([spec.vertex_coexact.vectors, spec.vertex_harmonic.vectors])
            assert vertex.shape == (cx.num_vertices, cx.num_vertices)
            assert np.allclose(vertex.T @ vertex, np.eye(cx.num_vertices), atol=1e-8)
            edge = np.hstack(
                [spec.edge_exact.vectors, spec.edge_coexact.vectors, spec.edge_harmonic.vectors]
            )
            assert edge.shape == (cx.num_edges, cx.num_edges)
            if cx.num_edges:
                assert np.allclose(edge.T @ edge, np.eye(cx.num_edges), atol=1e-8)

    def test_subspace_membership(self):
        rng = np.random.default_rng(4)
        for _ in range(8):
            cx = random_complex(rng, int(rng.integers(4, 10)))
            if cx.num_edges == 0:
                continue
            spec = eigendecompose_hodge(cx)
            B1 = cx.B1.astype(float)
            B2 = cx.B2.astype(float)
            L1 = hodge_laplacian(cx, 1)
            for u in spec.edge_exact.vectors.T:
                assert np.linalg.norm(B2.T @ u) <= 1e-8 * np.linalg.norm(u)
            for u in spec.edge_coexact.vectors.T:
                assert np.linalg.norm(B1 @ u) <= 1e-8 * np.linalg.norm(u)
            for u in spec.edge_harmonic.vectors.T:
                assert np.linalg.norm(L1 @ u) <= 1e-8 * np.linalg.norm(u)

    def test_eigenpair_residuals(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            cx = random_complex(rng, 8)
            spec = eigendecompose_hodge(cx)
            L0 = hodge_laplacian(cx, 0)
            lam_max = max(np.linalg.eigvalsh(L0).max(), 1.0)
            for block in (spec.vertex_coexact, spec.vertex_harmonic):
                for lam, u in zip(block.eigenvalues, block.vectors.T):
                    assert np.linalg.norm(L0 @ u - lam * u) <= 1e-8 * lam_max

    def test_parseval_over_blocks(self):
        rng = np.random.default_rng(6)
        for _ in range(6):
            cx = random_complex(rng, 7)
            spec = eigendecompose_hodge(cx)
            x = rng.normal(size=cx.num_vertices)
            coeffs = [
                spec.vertex_coexact.vectors.T @ x,
                spec.vertex_harmonic.vectors.T @ x,
            ]
            assert np.isclose(
                np.sqrt(sum(np.sum(c**2) for c in coeffs)), np.linalg.norm(x), atol=1e-8
            )
            if cx.num_edges:
                y = rng.normal(size=cx.num_edges)
                coeffs = [
                    spec.block(term).vectors.T @ y for term in ("ee", "ec", "eh")
                ]
                assert np.isclose(
                    np.sqrt(sum(np.sum(c**2) for c in coeffs)), np.linalg.norm(y), atol=1e-8
                )

    def test_merged_edge_block_is_full_basis(self):
        spec = eigendecompose_hodge(filled_triangle())
        merged = spec.block("e")
        assert merged.dim == 3
        assert np.allclose(merged.vectors.T @ merged.vectors, np.eye(3), atol=1e-10)
        assert np.all(np.diff(merged.eigenvalues) >= 0)


class TestFilters:
    def test_mexican_hat_at_zero(self):
        # closed form: b(0) = 2 / (sqrt(3 sigma) pi^(1/4))
        sigma = 1.0
        expected = 2.0 / (np.sqrt(3.0 * sigma) * np.pi**0.25)
        assert np.isclose(mexican_hat(0.0, sigma), expected)

    def test_mexican_hat_root_at_width(self):
        assert abs(mexican_hat(1.0, 1.0)) < 1e-15
        assert abs(mexican_hat(2.5, 2.5)) < 1e-15

    def test_filter_at_zero(self):
        bank = FilterBank("vertex", np.zeros(2), np.zeros((2, 3)))
        got = evaluate_filter(bank, 0, np.array([0.0]))
        expected = 1.0 + 3 * 2.0 / (np.sqrt(3.0) * np.pi**0.25)
        assert np.isclose(got[0], expected)

    def test_lowpass_only(self):
        bank = FilterBank("vertex", np.array([0.0]), np.zeros((1, 0)))
        lam = np.linspace(0, 3, 7)
        assert np.allclose(evaluate_filter(bank, 0, lam), np.exp(-(lam**2)))

    def test_responses_match_per_filter_evaluation(self):
        rng = np.random.default_rng(0)
        bank = FilterBank("edge", rng.normal(size=3), rng.normal(size=(3, 2)))
        lam = np.abs(rng.normal(size=9))
        table = filter_responses(bank, lam)
        for j in range(3):
            assert np.allclose(table[j], evaluate_filter(bank, j, lam))

    def test_finite_over_wide_scale_range(self):
        lam = np.linspace(0.0, 50.0, 101)
        for log_scale in np.log([1e-3, 1e-1, 1.0, 1e1, 1e3]):
            bank = FilterBank("vertex", np.array([log_scale]), np.full((1, 3), log_scale))
            out = evaluate_filter(bank, 0, lam)
            assert np.all(np.isfinite(out))

    def test_bad_filter_index(self):
        bank = FilterBank("vertex", np.zeros(1), np.zeros((1, 1)))
        with pytest.raises(ContractError):
            evaluate_filter(bank, 1, np.array([0.0]))

    def test_default_bank_covers_spectrum(self):
        bank = default_filter_bank("edge", lambda_max=8.0)
        assert bank.num_filters == 4 and bank.num_scales == 3
        betas = np.exp(bank.log_wavelet_scales)
        assert np.isclose(betas.min(), 0.5 / 8.0)
        assert np.isclose(betas.max(), 2.0 / 8.0)
        assert np.allclose(np.exp(bank.log_scaling_scale), 1.0 / 8.0)
        # filters must be pairwise distinct
        lam = np.linspace(0, 8, 33)
        table = filter_responses(bank, lam)
        for a in range(4):
            for b in range(a + 1, 4):
                assert not np.allclose(table[a], table[b])

    def test_flat_roundtrip(self):
        bank = default_filter_bank("vertex", 2.0)
        flat = bank.get_flat()
        other = default_filter_bank("vertex", 9.0)
        other.set_flat(flat)
        assert np.array_equal(other.get_flat(), flat)


class TestWaveletCoefficients:
    def test_identity_filter_reconstructs_signal(self):
        rng = np.random.default_rng(1)
        cx = random_complex(rng, 8)
        spec = eigendecompose_hodge(cx)
        bank = default_filter_bank("vertex", 4.0)
        x = rng.normal(size=cx.num_vertices)
        ones_v = [np.ones(spec.block(t).dim) for t in ("vc", "vh")]
        total = sum(
            wavelet_coefficients(x, spec.block(t), bank, 0, response=r)
            for t, r in zip(("vc", "vh"), ones_v)
        )
        assert np.allclose(total, x, atol=1e-10)
        if cx.num_edges:
            y = rng.normal(size=cx.num_edges)
            total = sum(
                wavelet_coefficients(
                    y, spec.block(t), bank, 0, response=np.ones(spec.block(t).dim)
                )
                for t in ("ee", "ec", "eh")
            )
            assert np.allclose(total, y, atol=1e-10)

    def test_identity_filter_components_orthogonal(self):
        rng = np.random.default_rng(2)
        cx = random_complex(rng, 9)
        spec = eigendecompose_hodge(cx)
        bank = default_filter_bank("edge", 4.0)
        y = rng.normal(size=cx.num_edges)
        parts = [
            wavelet_coefficients(y, spec.block(t), bank, 0, response=np.ones(spec.block(t).dim))
            for t in ("ee", "ec", "eh")
        ]
        for a in range(3):
            for b in range(a + 1, 3):
                assert abs(parts[a] @ parts[b]) <= 1e-8

    def test_constant_signal_coexact_part_vanishes(self):
        cx = build_complex(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])
        spec = eigendecompose_hodge(cx)
        bank = default_filter_bank("vertex", 5.0)
        out = wavelet_coefficients(np.ones(5), spec.vertex_coexact, bank, 0)
        assert np.allclose(out, 0.0, atol=1e-10)

    def test_eigenvector_input_scales_by_response(self):
        cx = four_cycle()
        spec = eigendecompose_hodge(cx)
        bank = default_filter_bank("vertex", 4.0)
        i = 1
        u = spec.vertex_coexact.vectors[:, i]
        lam = spec.vertex_coexact.eigenvalues[i]
        expected = evaluate_filter(bank, 2, np.array([lam]))[0] * u
        got = wavelet_coefficients(u, spec.vertex_coexact, bank, 2)
        assert np.allclose(got, expected, atol=1e-10)

    def test_empty_block_gives_zero_vector(self):
        bank = default_filter_bank("edge", 1.0)
        out = wavelet_coefficients(np.ones(4), EigenBlock.empty(4), bank, 0)
        assert np.array_equal(out, np.zeros(4))

    def test_dimension_mismatch(self):
        bank = default_filter_bank("vertex", 1.0)
        block = EigenBlock(np.ones(1), np.ones((3, 1)) / np.sqrt(3))
        with pytest.raises(ContractError):
            wavelet_coefficients(np.ones(4), block, bank, 0)
