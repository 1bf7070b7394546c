"""Hodge spectra and trainable graph wavelet filter banks.

The vertex spectrum of a complex splits into co-exact (nonzero eigenvalues
of L0) and harmonic (its kernel) blocks.  The edge spectrum splits into
exact = nonzero eigenpairs of B1^T B1, co-exact = nonzero eigenpairs of
B2 B2^T, and harmonic = the orthogonal complement of their union.  Keeping
the two edge decompositions separate avoids mixed eigenvectors when the
lower and upper spectra share an eigenvalue; B1 B2 = 0 guarantees the two
images are orthogonal, so the union is a valid basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericalError
from .topology import OrientedComplex

VERTEX_TERMS = ("vc", "vh")
EDGE_TERMS = ("ee", "ec", "eh")
HODGE_TERMS = VERTEX_TERMS + EDGE_TERMS
MERGED_TERMS = ("v", "e")

TERM_DOMAIN = {
    "vc": "vertex",
    "vh": "vertex",
    "ee": "edge",
    "ec": "edge",
    "eh": "edge",
    "v": "vertex",
    "e": "edge",
}


@dataclass(frozen=True)
class EigenBlock:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of one
    Hodge subspace; ``vectors`` is (ambient_dim, block_dim)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.vectors.shape[0]

    @staticmethod
    def empty(ambient_dim: int) -> "EigenBlock":
        return EigenBlock(np.zeros(0), np.zeros((ambient_dim, 0)))


def _concat_blocks(blocks) -> EigenBlock:
    blocks = list(blocks)
    eigenvalues = np.concatenate([b.eigenvalues for b in blocks])
    vectors = np.hstack([b.vectors for b in blocks])
    order = np.argsort(eigenvalues, kind="stable")
    return EigenBlock(eigenvalues[order], vectors[:, order])


@dataclass(frozen=True)
class HodgeSpectrum:
    """The five sub-eigenbases of a complex plus the zero threshold used to
    separate them."""

    vertex_coexact: EigenBlock
    vertex_harmonic: EigenBlock
    edge_exact: EigenBlock
    edge_coexact: EigenBlock
    edge_harmonic: EigenBlock
    zero_tolerance: float

    def block(self, term: str) -> EigenBlock:
        """Sub-basis for a named term; "v" and "e" merge a whole domain back
        into one full eigenbasis (used by the non-decomposed variant)."""
        if term == "vc":
            return self.vertex_coexact
        if term == "vh":
            return self.vertex_harmonic
        if term == "ee":
            return self.edge_exact
        if term == "ec":
            return self.edge_coexact
        if term == "eh":
            return self.edge_harmonic
        if term == "v":
            return _concat_blocks([self.vertex_harmonic, self.vertex_coexact])
        if term == "e":
            return _concat_blocks([self.edge_harmonic, self.edge_exact, self.edge_coexact])
        raise ContractError(f"unknown spectral term {term!r}")


def _eigh(matrix: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        return np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of {what} failed: {exc}") from exc


def vertex_split(
    cx: OrientedComplex, zero_tolerance: float | None = None
) -> tuple[EigenBlock, EigenBlock, float]:
    """Split the L0 eigenbasis into co-exact (lambda > tol) and harmonic
    blocks.  Returns (coexact, harmonic, tolerance_used)."""
    n = cx.num_vertices
    if n == 0:
        return EigenBlock.empty(0), EigenBlock.empty(0), zero_tolerance or 0.0
    B1 = cx.B1.astype(np.float64)
    eigenvalues, vectors = _eigh(B1 @ B1.T, f"L0 ({n} vertices)")
    tol = zero_tolerance
    if tol is None:
        tol = 1e-8 * max(eigenvalues[-1], 1.0)
    nonzero = eigenvalues > tol
    coexact = EigenBlock(eigenvalues[nonzero], vectors[:, nonzero])
    harmonic = EigenBlock(eigenvalues[~nonzero], vectors[:, ~nonzero])
    return coexact, harmonic, tol


def edge_split(
    cx: OrientedComplex, zero_tolerance: float | None = None
) -> tuple[EigenBlock, EigenBlock, EigenBlock, float]:
    """Split the edge space into exact / co-exact / harmonic blocks.

    Exact and co-exact come from separate decompositions of B1^T B1 and
    B2 B2^T; the harmonic block is the orthogonal complement of their
    union, obtained from a full SVD so the three blocks always span the
    whole edge space.  Returns (exact, coexact, harmonic, tolerance_used).
    """
    n_e = cx.num_edges
    if n_e == 0:
        empty = EigenBlock.empty(0)
        return empty, empty, empty, zero_tolerance or 0.0
    B1 = cx.B1.astype(np.float64)
    B2 = cx.B2.astype(np.float64)
    lo_vals, lo_vecs = _eigh(B1.T @ B1, f"B1^T B1 ({n_e} edges)")
    lam_max = lo_vals[-1]
    if cx.num_triangles:
        up_vals, up_vecs = _eigh(B2 @ B2.T, f"B2 B2^T ({n_e} edges)")
        lam_max = max(lam_max, up_vals[-1])
    else:
        up_vals, up_vecs = np.zeros(0), np.zeros((n_e, 0))
    tol = zero_tolerance
    if tol is None:
        tol = 1e-8 * max(lam_max, 1.0)
    keep_lo = lo_vals > tol
    keep_up = up_vals > tol
    exact = EigenBlock(lo_vals[keep_lo], lo_vecs[:, keep_lo])
    coexact = EigenBlock(up_vals[keep_up], up_vecs[:, keep_up])
    rank = exact.dim + coexact.dim
    if rank > n_e:
        raise NumericalError(
            f"edge split found rank {rank} > {n_e} edges; zero threshold {tol} too small"
        )
    if rank == n_e:
        harmonic = EigenBlock.empty(n_e)
    else:
        span = np.hstack([exact.vectors, coexact.vectors])
        if span.shape[1] == 0:
            basis = np.eye(n_e)
        else:
            left, _, _ = np.linalg.svd(span, full_matrices=True)
            basis = left[:, rank:]
        harmonic = EigenBlock(np.zeros(n_e - rank), basis)
    return exact, coexact, harmonic, tol


def eigendecompose_hodge(
    cx: OrientedComplex, zero_tolerance: float | None = None
) -> HodgeSpectrum:
    """Full Hodge spectrum of a complex.

    With ``zero_tolerance=None`` the threshold defaults to
    1e-8 * max(lambda_max, 1), with lambda_max taken over everything
    computed; relative thresholding keeps the split stable across graph
    sizes.
    """
    if zero_tolerance is not None and zero_tolerance <= 0:
        raise ContractError("zero_tolerance must be positive")
    if zero_tolerance is None:
        # first pass with per-domain defaults only to learn lambda_max
        vc, vh, tol_v = vertex_split(cx)
        ee, ec, eh, tol_e = edge_split(cx)
        lam_max = 1.0
        for block in (vc, ee, ec):
            if block.dim:
                lam_max = max(lam_max, block.eigenvalues[-1])
        tol = 1e-8 * lam_max
        if tol != tol_v:
            vc, vh, _ = vertex_split(cx, tol)
        if tol != tol_e:
            ee, ec, eh, _ = edge_split(cx, tol)
    else:
        tol = zero_tolerance
        vc, vh, _ = vertex_split(cx, tol)
        ee, ec, eh, _ = edge_split(cx, tol)
    return HodgeSpectrum(vc, vh, ee, ec, eh, tol)


# ---------------------------------------------------------------------------
# wavelet filters


def mexican_hat(x: np.ndarray, width: float = 1.0) -> np.ndarray:
    """Negative normalised second derivative of a Gaussian:
    b(x) = 2 / (sqrt(3 w) pi^(1/4)) (1 - (x/w)^2) exp(-x^2 / (2 w^2))."""
    x = np.asarray(x, dtype=np.float64)
    norm = 2.0 / (np.sqrt(3.0 * width) * np.pi**0.25)
    ratio_sq = (x / width) ** 2
    return norm * (1.0 - ratio_sq) * np.exp(-0.5 * ratio_sq)


def gaussian_lowpass(x: np.ndarray) -> np.ndarray:
    """Scaling function a(x) = exp(-x^2): smooth, positive, maximal at 0."""
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-(x**2))


@dataclass
class FilterBank:
    """A bank of W wavelet filters over one signal domain.

    Filter j evaluates w_j(lam) = a(alpha_j lam) + sum_l b(beta_jl lam)
    with a the Gaussian low-pass and b the Mexican hat of fixed width.
    All scales live in log space so they stay positive under gradient
    updates; the bank is what the outer optimisation loop trains.
    """

    domain: str
    log_scaling_scale: np.ndarray  # (W,)  log alpha_j
    log_wavelet_scales: np.ndarray  # (W, S)  log beta_jl
    mother_width: float = 1.0

    def __post_init__(self):
        self.log_scaling_scale = np.atleast_1d(np.asarray(self.log_scaling_scale, dtype=np.float64))
        self.log_wavelet_scales = np.asarray(self.log_wavelet_scales, dtype=np.float64).reshape(
            self.log_scaling_scale.shape[0], -1
        )
        if self.domain not in ("vertex", "edge"):
            raise ContractError(f"unknown filter domain {self.domain!r}")
        if self.num_filters < 1:
            raise ContractError("a filter bank needs at least one filter")
        if self.mother_width <= 0:
            raise ContractError("mother_width must be positive")

    @property
    def num_filters(self) -> int:
        return self.log_scaling_scale.shape[0]

    @property
    def num_scales(self) -> int:
        return self.log_wavelet_scales.shape[1]

    def num_params(self) -> int:
        return self.log_scaling_scale.size + self.log_wavelet_scales.size

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.log_scaling_scale, self.log_wavelet_scales.ravel()])

    def set_flat(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.num_params(),):
            raise ContractError("flat parameter vector has the wrong length")
        w = self.num_filters
        self.log_scaling_scale = values[:w].copy()
        self.log_wavelet_scales = values[w:].reshape(w, self.num_scales).copy()

    def copy(self) -> "FilterBank":
        return FilterBank(
            self.domain,
            self.log_scaling_scale.copy(),
            self.log_wavelet_scales.copy(),
            self.mother_width,
        )


def evaluate_filter(bank: FilterBank, filter_index: int, eigenvalues: np.ndarray) -> np.ndarray:
    """Response of filter ``filter_index`` at the given eigenvalues."""
    if not 0 <= filter_index < bank.num_filters:
        raise ContractError(
            f"filter index {filter_index} out of range for bank of {bank.num_filters}"
        )
    lam = np.asarray(eigenvalues, dtype=np.float64)
    alpha = np.exp(bank.log_scaling_scale[filter_index])
    out = gaussian_lowpass(alpha * lam)
    for log_beta in bank.log_wavelet_scales[filter_index]:
        out = out + mexican_hat(np.exp(log_beta) * lam, bank.mother_width)
    return out


def filter_responses(bank: FilterBank, eigenvalues: np.ndarray) -> np.ndarray:
    """All W filter responses at once, shape (W, len(eigenvalues))."""
    lam = np.asarray(eigenvalues, dtype=np.float64)[None, :]
    alphas = np.exp(bank.log_scaling_scale)[:, None]
    out = gaussian_lowpass(alphas * lam)
    if bank.num_scales:
        betas = np.exp(bank.log_wavelet_scales)[:, :, None]
        out = out + mexican_hat(betas * lam[None, :, :], bank.mother_width).sum(axis=1)
    return out


def wavelet_coefficients(
    signal: np.ndarray,
    block: EigenBlock,
    bank: FilterBank,
    filter_index: int,
    response: np.ndarray | None = None,
) -> np.ndarray:
    """Filtered signal restricted to one Hodge block: U w_j(Lam) U^T x.

    An empty block contributes nothing and returns the zero vector of the
    ambient space.  ``response`` overrides the filter evaluation (used by
    tests to stub the filter and by batch feature extraction).
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (block.ambient_dim,):
        raise ContractError(
            f"signal length {signal.shape} does not match ambient dimension {block.ambient_dim}"
        )
    if block.dim == 0:
        return np.zeros(block.ambient_dim)
    if response is None:
        response = evaluate_filter(bank, filter_index, block.eigenvalues)
    return block.vectors @ (response * (block.vectors.T @ signal))


def default_filter_bank(
    domain: str,
    lambda_max: float,
    num_filters: int = 4,
    num_scales: int = 3,
) -> FilterBank:
    """Bank initialisation from a population spectral range.

    alpha_j = 1/lambda_max for every filter; the W*S wavelet scales cover
    [0.5/lambda_max, 2/lambda_max] geometrically, dealt to filters in a
    strided pattern so each filter spans the range at a distinct offset.
    """
    lam = max(float(lambda_max), 1e-12)
    log_alpha = np.full(num_filters, -np.log(lam))
    if num_scales:
        grid = np.geomspace(0.5 / lam, 2.0 / lam, num_filters * num_scales)
        log_beta = np.log(grid).reshape(num_scales, num_filters).T
    else:
        log_beta = np.zeros((num_filters, 0))
    return FilterBank(domain, log_alpha, log_beta)
