import numpy as np
import pytest

from hodgelet.errors import ContractError
from hodgelet.features import (
    SpectralCache,
    active_terms,
    extract_dataset_features,
    extract_features,
    extract_features_cached,
    make_default_banks,
)
from hodgelet.spectral import HODGE_TERMS, eigendecompose_hodge, evaluate_filter
from hodgelet.topology import (
    LabeledComplex,
    build_complex,
    flip_edge_orientations,
    permute_complex,
)


def random_labeled_complex(rng, n=8, p=0.5, d_v=2, d_e=1):
    while True:
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        if edges:
            break
    cx = build_complex(n, edges)
    return LabeledComplex(
        complex=cx,
        vertex_features=rng.normal(size=(d_v, cx.num_vertices)),
        edge_features=rng.normal(size=(d_e, cx.num_edges)),
        label=int(rng.integers(2)),
    )


def default_banks_for(graph, num_filters=4, num_scales=3):
    cache = SpectralCache()
    lam = {
        "vertex": cache.domain_lambda_max([graph], "vertex"),
        "edge": cache.domain_lambda_max([graph], "edge"),
    }
    return make_default_banks(HODGE_TERMS, lam, num_filters, num_scales)


class TestExtractFeatures:
    def test_zero_signal_gives_zero_features(self):
        rng = np.random.default_rng(0)
        graph = random_labeled_complex(rng)
        zeroed = LabeledComplex(
            graph.complex,
            np.zeros_like(graph.vertex_features),
            np.zeros_like(graph.edge_features),
            graph.label,
        )
        banks = default_banks_for(graph)
        feats = extract_features(zeroed, eigendecompose_hodge(zeroed.complex), banks)
        for term in HODGE_TERMS:
            assert np.allclose(feats.vector(term), 0.0)

    def test_constant_vertex_signal(self):
        # connected graph: co-exact part vanishes, harmonic part is
        # |c| sqrt(N) |w_j(0)| for every dimension
        cx = build_complex(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
        c = -2.5
        graph = LabeledComplex(cx, np.full((1, 5), c), np.zeros((0, 5)), 0)
        banks = default_banks_for(graph)
        spec = eigendecompose_hodge(cx)
        feats = extract_features(graph, spec, banks)
        assert np.allclose(feats.v_c, 0.0, atol=1e-12)
        expected = np.array(
            [
                abs(c) * np.sqrt(5) * abs(evaluate_filter(banks["vh"], j, np.zeros(1))[0])
                for j in range(banks["vh"].num_filters)
            ]
        )
        assert np.allclose(feats.v_h, expected, atol=1e-10)

    def test_absent_edge_domain_gives_empty_vectors(self):
        cx = build_complex(3, [(0, 1), (1, 2)])
        graph = LabeledComplex(cx, np.ones((2, 3)), np.zeros((0, 2)), 0)
        feats = extract_features(graph, eigendecompose_hodge(cx), default_banks_for(graph))
        assert feats.e_e.shape == (0,)
        assert feats.e_c.shape == (0,)
        assert feats.e_h.shape == (0,)
        assert feats.v_c.shape == (2 * 4,)

    def test_layout_is_dimension_major(self):
        # second dimension all zero: entries [W:] of each vertex term vanish
        cx = build_complex(4, [(0, 1), (1, 2), (2, 3)])
        vf = np.vstack([np.random.default_rng(1).normal(size=(1, 4)), np.zeros((1, 4))])
        graph = LabeledComplex(cx, vf, np.zeros((0, 3)), 0)
        banks = default_banks_for(graph)
        feats = extract_features(graph, eigendecompose_hodge(cx), banks)
        W = banks["vc"].num_filters
        assert feats.v_c.shape == (2 * W,)
        assert np.allclose(feats.v_c[W:], 0.0)
        assert not np.allclose(feats.v_c[:W], 0.0)

    def test_mismatched_spectrum_raises(self):
        rng = np.random.default_rng(3)
        graph = random_labeled_complex(rng, n=6)
        other = random_labeled_complex(rng, n=7)
        with pytest.raises(ContractError):
            extract_features(
                graph, eigendecompose_hodge(other.complex), default_banks_for(graph)
            )

    def test_cached_path_matches_direct_path(self):
        rng = np.random.default_rng(4)
        graph = random_labeled_complex(rng)
        banks = default_banks_for(graph)
        direct = extract_features(graph, eigendecompose_hodge(graph.complex), banks)
        cached = extract_features_cached(graph, banks, SpectralCache())
        for term in HODGE_TERMS:
            assert np.allclose(direct.vector(term), cached.vector(term), atol=1e-10)


class TestDatasetExtraction:
    def test_empty_dataset(self):
        assert extract_dataset_features([], {}) == []

    def test_identical_graphs_identical_features(self):
        rng = np.random.default_rng(5)
        graph = random_labeled_complex(rng)
        banks = default_banks_for(graph)
        feats = extract_dataset_features([graph, graph], banks)
        for term in HODGE_TERMS:
            assert np.array_equal(feats[0].vector(term), feats[1].vector(term))

    def test_permuted_copy_appended(self):
        rng = np.random.default_rng(6)
        graph = random_labeled_complex(rng)
        permuted = permute_complex(graph, rng.permutation(graph.complex.num_vertices))
        banks = default_banks_for(graph)
        feats = extract_dataset_features([graph, permuted], banks)
        for term in HODGE_TERMS:
            assert np.allclose(feats[0].vector(term), feats[1].vector(term), atol=1e-9)


class TestInvariance:
    def test_permutation_invariance(self):
        rng = np.random.default_rng(7)
        for g in range(5):
            graph = random_labeled_complex(rng, n=int(rng.integers(5, 10)))
            banks = default_banks_for(graph)
            base = extract_features(graph, eigendecompose_hodge(graph.complex), banks)
            for _ in range(20):
                perm = rng.permutation(graph.complex.num_vertices)
                relabeled = permute_complex(graph, perm)
                feats = extract_features(
                    relabeled, eigendecompose_hodge(relabeled.complex), banks
                )
                for term in HODGE_TERMS:
                    assert np.allclose(
                        base.vector(term), feats.vector(term), atol=1e-9
                    ), f"term {term} not invariant under permutation"

    def test_orientation_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            graph = random_labeled_complex(rng, n=7)
            banks = default_banks_for(graph)
            base = extract_features(graph, eigendecompose_hodge(graph.complex), banks)
            k = int(rng.integers(1, graph.complex.num_edges + 1))
            idx = rng.choice(graph.complex.num_edges, size=k, replace=False)
            flipped = flip_edge_orientations(graph, idx)
            feats = extract_features(flipped, eigendecompose_hodge(flipped.complex), banks)
            for term in ("ee", "ec", "eh"):
                assert np.allclose(base.vector(term), feats.vector(term), atol=1e-9)

    def test_scaling_equivariance(self):
        rng = np.random.default_rng(9)
        graph = random_labeled_complex(rng, d_v=2)
        banks = default_banks_for(graph)
        spec = eigendecompose_hodge(graph.complex)
        base = extract_features(graph, spec, banks)
        t = 3.75
        scaled_vf = graph.vertex_features.copy()
        scaled_vf[1] *= t
        scaled = LabeledComplex(graph.complex, scaled_vf, graph.edge_features, graph.label)
        feats = extract_features(scaled, spec, banks)
        W = banks["vc"].num_filters
        for term in ("vc", "vh"):
            assert np.allclose(feats.vector(term)[:W], base.vector(term)[:W], atol=1e-12)
            assert np.allclose(feats.vector(term)[W:], t * base.vector(term)[W:], atol=1e-12)

    def test_smooth_in_log_scales(self):
        # central differences at two step sizes agree: features are smooth
        # in the log-scale parameters
        rng = np.random.default_rng(10)
        graph = random_labeled_complex(rng)
        banks = default_banks_for(graph)
        cache = SpectralCache()

        def feature_sum(term, param_index, delta):
            bank = banks[term].copy()
            flat = bank.get_flat()
            flat[param_index] += delta
            bank.set_flat(flat)
            feats = extract_features_cached(graph, {term: bank}, cache)
            return float(np.sum(feats.vector(term)))

        for term in ("vc", "ee"):
            for param_index in (0, banks[term].num_filters):  # one alpha, one beta
                derivs = []
                for h in (1e-4, 1e-5):
                    derivs.append(
                        (feature_sum(term, param_index, h) - feature_sum(term, param_index, -h))
                        / (2 * h)
                    )
                scale = max(abs(derivs[0]), abs(derivs[1]), 1e-12)
                assert abs(derivs[0] - derivs[1]) / scale < 1e-3


class TestActiveTerms:
    def test_both_domains(self):
        rng = np.random.default_rng(11)
        dataset = [random_labeled_complex(rng) for _ in range(3)]
        assert active_terms(dataset, hodge=True) == ("vc", "vh", "ee", "ec", "eh")
        assert active_terms(dataset, hodge=False) == ("v", "e")

    def test_vertex_only(self):
        cx = build_complex(3, [(0, 1), (1, 2)])
        dataset = [LabeledComplex(cx, np.ones((1, 3)), np.zeros((0, 2)), 0)]
        assert active_terms(dataset) == ("vc", "vh")

    def test_mismatched_dims_raise(self):
        cx = build_complex(3, [(0, 1), (1, 2)])
        a = LabeledComplex(cx, np.ones((1, 3)), np.zeros((0, 2)), 0)
        b = LabeledComplex(cx, np.ones((2, 3)), np.zeros((0, 2)), 0)
        with pytest.raises(ContractError):
            active_terms([a, b])
