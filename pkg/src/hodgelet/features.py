"""Spectral feature vectors: per-dimension, per-filter 2-norms of
subspace-restricted wavelet coefficients.

Feature vectors are flat with index (d, j) laid out dimension-major
(entry d * W + j).  They are invariant to vertex relabeling and to edge
re-orientation, and 1-homogeneous in the signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ContractError
from .spectral import (
    TERM_DOMAIN,
    EigenBlock,
    FilterBank,
    HodgeSpectrum,
    _concat_blocks,
    default_filter_bank,
    edge_split,
    filter_responses,
    vertex_split,
)
from .topology import LabeledComplex

EMPTY = np.zeros(0)


@dataclass(eq=False)
class HodgeletFeatures:
    """Per-term spectral feature vectors of one graph.

    ``terms`` maps a term name to its flat feature vector; the canonical
    decomposition uses keys vc, vh (vertex co-exact / harmonic; length
    W_v * D_v) and ee, ec, eh (edge exact / co-exact / harmonic; length
    W_e * D_e).  Absent domains give empty vectors.
    """

    terms: dict[str, np.ndarray]

    def vector(self, term: str) -> np.ndarray:
        return self.terms.get(term, EMPTY)

    @property
    def v_c(self) -> np.ndarray:
        return self.vector("vc")

    @property
    def v_h(self) -> np.ndarray:
        return self.vector("vh")

    @property
    def e_e(self) -> np.ndarray:
        return self.vector("ee")

    @property
    def e_c(self) -> np.ndarray:
        return self.vector("ec")

    @property
    def e_h(self) -> np.ndarray:
        return self.vector("eh")


def _block_feature_vector(
    eigenvalues: np.ndarray, coeffs: np.ndarray, bank: FilterBank, num_dims: int
) -> np.ndarray:
    """Norms of filtered coefficients; ``coeffs`` is (block_dim, D)."""
    if coeffs.shape[0] == 0:
        return np.zeros(num_dims * bank.num_filters)
    responses = filter_responses(bank, eigenvalues)  # (W, m)
    sq = responses**2 @ coeffs**2  # (W, D)
    return np.sqrt(sq).T.ravel()  # (D * W,), entry d * W + j


def extract_features(
    graph: LabeledComplex,
    spectrum: HodgeSpectrum,
    banks: Mapping[str, FilterBank],
) -> HodgeletFeatures:
    """Feature vectors of one graph for every term named in ``banks``.

    The term name selects the Hodge block ("vc", "vh", "ee", "ec", "eh",
    or the merged "v"/"e") and the signal domain.  Dimensions with an
    absent domain yield empty vectors; empty blocks contribute zeros.
    """
    out: dict[str, np.ndarray] = {}
    for term, bank in banks.items():
        domain = TERM_DOMAIN.get(term)
        if domain is None:
            raise ContractError(f"unknown feature term {term!r}")
        if bank.domain != domain:
            raise ContractError(f"bank for term {term!r} has domain {bank.domain!r}")
        signals = graph.vertex_features if domain == "vertex" else graph.edge_features
        num_dims = signals.shape[0]
        if num_dims == 0:
            out[term] = EMPTY
            continue
        block = spectrum.block(term)
        if block.ambient_dim != signals.shape[1]:
            raise ContractError(
                f"spectrum block {term!r} has ambient dim {block.ambient_dim}, "
                f"features have {signals.shape[1]} columns"
            )
        coeffs = block.vectors.T @ signals.T  # (m, D)
        out[term] = _block_feature_vector(block.eigenvalues, coeffs, bank, num_dims)
    return HodgeletFeatures(out)


class SpectralCache:
    """Per-graph eigendecompositions and Fourier coefficients, computed once.

    The eigendecomposition and the projections U^T x do not depend on any
    trainable parameter, so optimizer steps that perturb filter scales
    only redo the cheap filter-and-norm stage.  Graphs are keyed by object
    identity; the cache holds references to keep keys stable.
    """

    def __init__(self, zero_tolerance: float | None = None):
        self.zero_tolerance = zero_tolerance
        self._blocks: dict[int, dict[str, EigenBlock]] = {}
        self._coeffs: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
        self._refs: dict[int, LabeledComplex] = {}

    def _domain_blocks(self, graph: LabeledComplex, domain: str) -> None:
        store = self._blocks.setdefault(id(graph), {})
        self._refs[id(graph)] = graph
        if domain == "vertex" and "vc" not in store:
            vc, vh, _ = vertex_split(graph.complex, self.zero_tolerance)
            store["vc"], store["vh"] = vc, vh
        if domain == "edge" and "ee" not in store:
            ee, ec, eh, _ = edge_split(graph.complex, self.zero_tolerance)
            store["ee"], store["ec"], store["eh"] = ee, ec, eh

    def block(self, graph: LabeledComplex, term: str) -> EigenBlock:
        domain = TERM_DOMAIN[term]
        self._domain_blocks(graph, domain)
        store = self._blocks[id(graph)]
        if term == "v":
            return _concat_blocks([store["vh"], store["vc"]])
        if term == "e":
            return _concat_blocks([store["eh"], store["ee"], store["ec"]])
        return store[term]

    def term_data(self, graph: LabeledComplex, term: str) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues, Fourier coefficients (m, D)) for one graph and term."""
        per_graph = self._coeffs.setdefault(id(graph), {})
        if term not in per_graph:
            domain = TERM_DOMAIN[term]
            signals = graph.vertex_features if domain == "vertex" else graph.edge_features
            block = self.block(graph, term)
            if signals.shape[1] != block.ambient_dim:
                raise ContractError(
                    f"features of graph do not match its complex on domain {domain!r}"
                )
            per_graph[term] = (block.eigenvalues, block.vectors.T @ signals.T)
        return per_graph[term]

    def domain_lambda_max(self, graphs, domain: str) -> float:
        """Largest eigenvalue observed across ``graphs`` on one domain."""
        lam = 0.0
        terms = ("vc",) if domain == "vertex" else ("ee", "ec")
        for graph in graphs:
            self._domain_blocks(graph, domain)
            store = self._blocks[id(graph)]
            for term in terms:
                if store[term].dim:
                    lam = max(lam, float(store[term].eigenvalues[-1]))
        return lam


def active_terms(dataset, hodge: bool = True) -> tuple[str, ...]:
    """Terms active for a dataset: vertex terms when D_v >= 1, edge terms
    when D_e >= 1; the merged variant uses one term per domain."""
    if not dataset:
        raise ContractError("empty dataset has no active terms")
    d_v = dataset[0].num_vertex_dims
    d_e = dataset[0].num_edge_dims
    for graph in dataset:
        if graph.num_vertex_dims != d_v or graph.num_edge_dims != d_e:
            raise ContractError("graphs disagree on feature dimensionalities")
    terms: list[str] = []
    if d_v:
        terms.extend(("vc", "vh") if hodge else ("v",))
    if d_e:
        terms.extend(("ee", "ec", "eh") if hodge else ("e",))
    if not terms:
        raise ContractError("dataset has neither vertex nor edge features")
    return tuple(terms)


def make_default_banks(
    terms,
    lambda_max_by_domain: Mapping[str, float],
    num_filters: int = 4,
    num_scales: int = 3,
) -> dict[str, FilterBank]:
    """One independently parameterised bank per term, initialised from the
    population spectral range of its domain."""
    return {
        term: default_filter_bank(
            TERM_DOMAIN[term],
            lambda_max_by_domain.get(TERM_DOMAIN[term], 1.0),
            num_filters,
            num_scales,
        )
        for term in terms
    }


def extract_features_cached(
    graph: LabeledComplex,
    banks: Mapping[str, FilterBank],
    cache: SpectralCache,
) -> HodgeletFeatures:
    out: dict[str, np.ndarray] = {}
    for term, bank in banks.items():
        domain = TERM_DOMAIN[term]
        signals = graph.vertex_features if domain == "vertex" else graph.edge_features
        num_dims = signals.shape[0]
        if num_dims == 0:
            out[term] = EMPTY
            continue
        eigenvalues, coeffs = cache.term_data(graph, term)
        out[term] = _block_feature_vector(eigenvalues, coeffs, bank, num_dims)
    return HodgeletFeatures(out)


def extract_dataset_features(
    dataset,
    banks: Mapping[str, FilterBank],
    cache: SpectralCache | None = None,
) -> list[HodgeletFeatures]:
    """Features for every graph, in dataset order.  A shared cache makes
    repeated extraction under different bank parameters cheap."""
    if cache is None:
        cache = SpectralCache()
    return [extract_features_cached(graph, banks, cache) for graph in dataset]


def term_feature_matrix(
    dataset,
    term: str,
    bank: FilterBank,
    cache: SpectralCache,
) -> np.ndarray:
    """Stacked feature vectors of a single term, shape (n_graphs, D * W).
    The fast path for hyperparameter probes that perturb one bank."""
    domain = TERM_DOMAIN[term]
    rows = []
    for graph in dataset:
        signals = graph.vertex_features if domain == "vertex" else graph.edge_features
        num_dims = signals.shape[0]
        if num_dims == 0:
            rows.append(EMPTY)
            continue
        eigenvalues, coeffs = cache.term_data(graph, term)
        rows.append(_block_feature_vector(eigenvalues, coeffs, bank, num_dims))
    return np.vstack(rows) if rows else np.zeros((0, 0))
