"""Base kernels and the additive per-term kernel over spectral features.

Each active term (a Hodge block's feature vector) gets an independent
base kernel; the graph-level kernel is their sum, which stays positive
semi-definite.  Hyperparameters are log-parameterised so gradient updates
keep them positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ContractError
from .features import HodgeletFeatures

SQUARED_EXPONENTIAL = "squared-exponential"
MATERN = "matern"
_MATERN_NUS = (0.5, 1.5, 2.5)


@dataclass
class TermParams:
    """Hyperparameters of one base kernel: family tag, log variance,
    log lengthscale, and (for Matern) a fixed half-integer smoothness."""

    family: str = SQUARED_EXPONENTIAL
    log_variance: float = 0.0
    log_lengthscale: float = 0.0
    nu: float = 1.5

    def __post_init__(self):
        if self.family not in (SQUARED_EXPONENTIAL, MATERN):
            raise ContractError(f"unknown kernel family {self.family!r}")
        if self.family == MATERN and self.nu not in _MATERN_NUS:
            raise ContractError(f"Matern smoothness must be one of {_MATERN_NUS}")

    @property
    def variance(self) -> float:
        return float(np.exp(self.log_variance))

    @property
    def lengthscale(self) -> float:
        return float(np.exp(self.log_lengthscale))

    def copy(self) -> "TermParams":
        return TermParams(self.family, self.log_variance, self.log_lengthscale, self.nu)


@dataclass
class KernelParams:
    """Additive kernel: one TermParams per active term, keyed by term name.
    A term is active exactly when its key is present."""

    terms: dict[str, TermParams] = field(default_factory=dict)

    def __post_init__(self):
        if not self.terms:
            raise ContractError("at least one kernel term must be active")

    def copy(self) -> "KernelParams":
        return KernelParams({name: p.copy() for name, p in self.terms.items()})

    def num_params(self) -> int:
        return 2 * len(self.terms)

    def get_flat(self) -> np.ndarray:
        out = []
        for params in self.terms.values():
            out.extend((params.log_variance, params.log_lengthscale))
        return np.array(out)

    def set_flat(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.num_params(),):
            raise ContractError("flat hyperparameter vector has the wrong length")
        for i, params in enumerate(self.terms.values()):
            params.log_variance = float(values[2 * i])
            params.log_lengthscale = float(values[2 * i + 1])


def kernel_from_sq_distances(params: TermParams, sq_dists: np.ndarray) -> np.ndarray:
    """Kernel values from squared distances (vectorised)."""
    sq = np.maximum(np.asarray(sq_dists, dtype=np.float64), 0.0)
    variance = params.variance
    ell = params.lengthscale
    if params.family == SQUARED_EXPONENTIAL:
        return variance * np.exp(-0.5 * sq / ell**2)
    r = np.sqrt(sq) / ell
    if params.nu == 0.5:
        return variance * np.exp(-r)
    if params.nu == 1.5:
        z = np.sqrt(3.0) * r
        return variance * (1.0 + z) * np.exp(-z)
    z = np.sqrt(5.0) * r
    return variance * (1.0 + z + z**2 / 3.0) * np.exp(-z)


def base_kernel(family: str, params: TermParams, x: np.ndarray, y: np.ndarray) -> float:
    """Evaluate one base kernel on a pair of feature vectors."""
    if family != params.family:
        raise ContractError(f"family {family!r} does not match params ({params.family!r})")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ContractError(f"kernel inputs have shapes {x.shape} vs {y.shape}")
    return float(kernel_from_sq_distances(params, np.sum((x - y) ** 2)))


def hodgelet_kernel(
    params: KernelParams, f1: HodgeletFeatures, f2: HodgeletFeatures
) -> float:
    """Sum of active base-kernel terms, each on its feature pair."""
    total = 0.0
    for term, term_params in params.terms.items():
        x, y = f1.vector(term), f2.vector(term)
        if x.shape != y.shape:
            raise ContractError(f"feature layouts differ on term {term!r}")
        total += base_kernel(term_params.family, term_params, x, y)
    return total


def _feature_matrix(features, term: str) -> np.ndarray:
    rows = [f.vector(term) for f in features]
    lengths = {r.shape[0] for r in rows}
    if len(lengths) > 1:
        raise ContractError(f"feature layouts differ on term {term!r}")
    return np.vstack(rows) if rows else np.zeros((0, 0))


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    upper = np.triu(matrix)
    return upper + np.triu(matrix, 1).T


class GramCache:
    """Per-term squared-distance matrices for a fixed feature list.

    Hyperparameter changes reuse every distance matrix; a bank perturbation
    invalidates only its own term via ``update_term``.
    """

    def __init__(self, features, terms):
        self.n = len(features)
        self.terms = tuple(terms)
        self.sq_dists: dict[str, np.ndarray] = {}
        for term in self.terms:
            self.update_term(term, features)

    def update_term(self, term: str, features) -> None:
        self.update_term_matrix(term, _feature_matrix(features, term))

    def update_term_matrix(self, term: str, X: np.ndarray) -> None:
        self.sq_dists[term] = self.sq_distance_matrix(X)

    @staticmethod
    def sq_distance_matrix(X: np.ndarray) -> np.ndarray:
        return _symmetrize(cdist(X, X, "sqeuclidean"))

    def assemble(self, params: KernelParams, jitter: float | None = None) -> np.ndarray:
        K = np.zeros((self.n, self.n))
        for term, term_params in params.terms.items():
            K += kernel_from_sq_distances(term_params, self.sq_dists[term])
        if jitter is None:
            jitter = 1e-6 * float(np.mean(np.diag(K))) if self.n else 0.0
        K[np.diag_indices_from(K)] += jitter
        return K


def gram_matrix(
    params: KernelParams, features, jitter: float | None = None
) -> np.ndarray:
    """Symmetric kernel matrix over a feature list with diagonal jitter
    (default 1e-6 times the mean diagonal)."""
    if jitter is not None and jitter < 0:
        raise ContractError("jitter must be non-negative")
    cache = GramCache(features, tuple(params.terms))
    return cache.assemble(params, jitter)


def cross_gram(params: KernelParams, features_a, features_b) -> np.ndarray:
    """Rectangular kernel matrix between two feature lists (no jitter)."""
    K = np.zeros((len(features_a), len(features_b)))
    for term, term_params in params.terms.items():
        Xa = _feature_matrix(features_a, term)
        Xb = _feature_matrix(features_b, term)
        if Xa.shape[1] != Xb.shape[1]:
            raise ContractError(f"feature layouts differ on term {term!r}")
        K += kernel_from_sq_distances(term_params, cdist(Xa, Xb, "sqeuclidean"))
    return K


def diag_gram(params: KernelParams, features) -> np.ndarray:
    """Self-kernel values k(x, x) = sum of term variances, per feature."""
    total = sum(p.variance for p in params.terms.values())
    return np.full(len(features), total)


def default_kernel_params(
    terms,
    features,
    family: str = SQUARED_EXPONENTIAL,
    nu: float = 1.5,
) -> KernelParams:
    """Unit variance per term; lengthscale from the median pairwise feature
    distance (falls back to 1 when degenerate)."""
    params: dict[str, TermParams] = {}
    for term in terms:
        X = _feature_matrix(features, term)
        ell = 1.0
        if X.shape[0] >= 2 and X.shape[1] >= 1:
            d = cdist(X, X)
            med = float(np.median(d[np.triu_indices_from(d, 1)]))
            if med > 1e-12:
                ell = med
        params[term] = TermParams(family, 0.0, float(np.log(ell)), nu)
    return KernelParams(params)
