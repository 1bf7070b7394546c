"""Variational Gaussian-process classification over spectral-feature kernels.

The posterior over the latent function values at the training graphs is a
full-rank Gaussian per latent process (one latent for binary problems,
one per class with a softmax likelihood otherwise).  Training alternates

  * an inner loop: diagonal-adaptive gradient ascent on the ELBO over the
    variational mean and Cholesky factor, with analytic gradients
    (Gaussian identities plus quadrature / Monte-Carlo weights), and
  * an outer loop: ascent over log kernel hyperparameters and log filter
    scales using central finite differences.  At fixed variational state
    only the KL term depends on these, so each probe is one Gram assembly
    and one Cholesky.  Steps that would lower the ELBO are rejected, which
    keeps the recorded ELBO non-decreasing.

Monte-Carlo expectations use common random numbers derived from the run
seed, so the objective is deterministic and runs are reproducible
bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import expit, logsumexp

from .errors import ContractError, NumericalError
from .features import (
    HodgeletFeatures,
    SpectralCache,
    active_terms,
    extract_dataset_features,
    make_default_banks,
    term_feature_matrix,
)
from .kernel import (
    GramCache,
    KernelParams,
    cross_gram,
    default_kernel_params,
    diag_gram,
    kernel_from_sq_distances,
)
from .spectral import FilterBank

GH_POINTS = 20
PREDICT_SAMPLES = 2048

BERNOULLI = "bernoulli-logit"
SOFTMAX = "softmax-mc"
GAUSSIAN = "gaussian"  # diagnostic surrogate; not selectable by fit()


@dataclass
class TrainConfig:
    """Optimization budget and reproducibility knobs for fit()."""

    max_outer_iters: int = 50
    inner_iters: int = 200
    inner_lr: float = 0.05
    outer_lr: float = 0.1
    mc_samples: int = 64
    elbo_rel_tol: float = 1e-5
    fd_step: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.inner_iters < 1 or self.mc_samples < 1:
            raise ContractError("iteration and sample counts must be >= 1")
        if self.elbo_rel_tol <= 0 or self.fd_step <= 0:
            raise ContractError("tolerances must be positive")
        if self.inner_lr <= 0 or self.outer_lr <= 0:
            raise ContractError("learning rates must be positive")


@dataclass
class GpModel:
    """Trained classifier state: kernel and filter parameters, the
    variational posterior per latent process, and the cached training
    features it was fitted to."""

    kernel_params: KernelParams
    filter_banks: dict[str, FilterBank]
    classes: np.ndarray
    likelihood: str
    variational_mean: np.ndarray  # (num_latents, N)
    variational_chol_raw: np.ndarray  # (num_latents, N, N); diagonal stored in log
    train_features: list[HodgeletFeatures]
    train_labels: np.ndarray  # 0-based class indices
    rng_seed: int
    mc_samples: int = 64
    jitter: float | None = None
    gaussian_noise_variance: float = 1.0
    elbo_trace: list[float] = field(default_factory=list)

    @property
    def num_train(self) -> int:
        return len(self.train_features)

    @property
    def num_latents(self) -> int:
        return self.variational_mean.shape[0]

    @property
    def terms(self) -> tuple[str, ...]:
        return tuple(self.kernel_params.terms)

    def variational_chol(self) -> np.ndarray:
        return _chol_from_raw(self.variational_chol_raw)


def _chol_from_raw(raw: np.ndarray) -> np.ndarray:
    """Lower-triangular factors with positive diagonal from raw storage."""
    raw = np.atleast_3d(raw)
    out = np.tril(raw, -1)
    idx = np.arange(raw.shape[-1])
    out[:, idx, idx] = np.exp(raw[:, idx, idx])
    return out


def _gh_nodes():
    nodes, weights = np.polynomial.hermite.hermgauss(GH_POINTS)
    return nodes, weights / np.sqrt(np.pi)


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _mc_eps(seed: int, shape) -> np.ndarray:
    return np.random.default_rng([seed, 7771]).standard_normal(shape)


def robust_cholesky(K: np.ndarray, base_jitter: float) -> np.ndarray:
    """Lower Cholesky factor, escalating jitter tenfold up to three times."""
    added = 0.0
    for attempt in range(4):
        try:
            return cholesky(K + added * np.eye(K.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            added = base_jitter * 10.0 ** (attempt + 1)
    raise NumericalError(
        f"Cholesky of the {K.shape[0]}x{K.shape[0]} Gram matrix failed "
        f"after escalating jitter to {added:g}"
    )


# ---------------------------------------------------------------------------
# ELBO pieces


def _kl_value(m: np.ndarray, Lq: np.ndarray, R: np.ndarray) -> float:
    """KL(N(m, Lq Lq^T) || N(0, R R^T)) in closed form."""
    alpha = solve_triangular(R, m, lower=True)
    A = solve_triangular(R, Lq, lower=True)
    n = m.shape[0]
    logdet_K = 2.0 * np.sum(np.log(np.diag(R)))
    logdet_S = 2.0 * np.sum(np.log(np.diag(Lq)))
    return 0.5 * (np.sum(A * A) + alpha @ alpha - n + logdet_K - logdet_S)


def _kl_and_grads(m, Lq, R):
    alpha = solve_triangular(R, m, lower=True)
    A = solve_triangular(R, Lq, lower=True)
    n = m.shape[0]
    logdet_K = 2.0 * np.sum(np.log(np.diag(R)))
    logdet_S = 2.0 * np.sum(np.log(np.diag(Lq)))
    kl = 0.5 * (np.sum(A * A) + alpha @ alpha - n + logdet_K - logdet_S)
    dkl_dm = solve_triangular(R.T, alpha, lower=False)
    dkl_dL = np.tril(solve_triangular(R.T, A, lower=False))
    idx = np.arange(n)
    dkl_dL[idx, idx] -= 1.0 / np.diag(Lq)
    return kl, dkl_dm, dkl_dL


def _marginal_sd(Lq: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(Lq**2, axis=1))


def _bernoulli_ell_and_grads(m, Lq, z, nodes, weights):
    """Expected Bernoulli-logit log-likelihood by Gauss-Hermite quadrature,
    with gradients with respect to the variational mean and factor."""
    s = _marginal_sd(Lq)
    A = m[:, None] + np.sqrt(2.0) * s[:, None] * nodes[None, :]
    zA = z[:, None] * A
    ell = float(np.sum(weights[None, :] * _log_sigmoid(zA)))
    inner = weights[None, :] * expit(-zA) * z[:, None]
    dell_dm = inner.sum(axis=1)
    dell_ds = (inner * (np.sqrt(2.0) * nodes[None, :])).sum(axis=1)
    dell_dL = np.tril((dell_ds / s)[:, None] * Lq)
    return ell, dell_dm, dell_dL


def _gaussian_ell_and_grads(m, Lq, targets, noise_variance):
    s2 = np.sum(Lq**2, axis=1)
    resid = targets - m
    ell = float(
        np.sum(-0.5 * np.log(2.0 * np.pi * noise_variance) - (resid**2 + s2) / (2 * noise_variance))
    )
    dell_dm = resid / noise_variance
    dell_dL = np.tril(-Lq / noise_variance)
    return ell, dell_dm, dell_dL


def _softmax_ell_and_grads(m_all, Lq_all, y, eps):
    """Monte-Carlo expected softmax log-likelihood under common random
    numbers; eps has shape (samples, classes, n)."""
    S = eps.shape[0]
    n = m_all.shape[1]
    F = m_all[None, :, :] + np.einsum("cij,scj->sci", Lq_all, eps)
    lse = logsumexp(F, axis=1)  # (S, n)
    picked = F[:, y, np.arange(n)]  # (S, n)
    ell = float(np.sum(picked - lse)) / S
    P = np.exp(F - lse[:, None, :])
    G = -P
    G[:, y, np.arange(n)] += 1.0
    dell_dm = G.mean(axis=0)
    dell_dL = np.einsum("scn,scj->cnj", G, eps) / S
    dell_dL = np.tril(dell_dL)
    return ell, dell_dm, dell_dL


def _elbo_and_grads(likelihood, m_all, raw_all, R, y, aux):
    """ELBO value and gradients with respect to the raw variational
    parameters.  ``aux`` carries quadrature nodes, MC draws, or the
    Gaussian surrogate targets depending on the likelihood."""
    Lq_all = _chol_from_raw(raw_all)
    num_latents, n = m_all.shape
    idx = np.arange(n)

    if likelihood == BERNOULLI:
        z = np.where(y == 1, 1.0, -1.0)
        ell, dm, dL = _bernoulli_ell_and_grads(m_all[0], Lq_all[0], z, *aux)
        dell_dm, dell_dL = dm[None, :], dL[None, :, :]
    elif likelihood == GAUSSIAN:
        targets, noise_variance = aux
        ell, dm, dL = _gaussian_ell_and_grads(m_all[0], Lq_all[0], targets, noise_variance)
        dell_dm, dell_dL = dm[None, :], dL[None, :, :]
    elif likelihood == SOFTMAX:
        ell, dell_dm, dell_dL = _softmax_ell_and_grads(m_all, Lq_all, y, aux)
    else:
        raise ContractError(f"unknown likelihood {likelihood!r}")

    kl_total = 0.0
    grad_m = np.empty_like(m_all)
    grad_raw = np.zeros_like(raw_all)
    for latent in range(num_latents):
        kl, dkl_dm, dkl_dL = _kl_and_grads(m_all[latent], Lq_all[latent], R)
        kl_total += kl
        grad_m[latent] = dell_dm[latent] - dkl_dm
        dL = dell_dL[latent] - dkl_dL
        dL[idx, idx] *= np.diag(Lq_all[latent])  # chain rule through log diagonal
        grad_raw[latent] = np.tril(dL)
    return ell - kl_total, grad_m, grad_raw


def _elbo_value(likelihood, m_all, raw_all, R, y, aux) -> float:
    value, _, _ = _elbo_and_grads(likelihood, m_all, raw_all, R, y, aux)
    return value


def elbo(model: GpModel) -> float:
    """ELBO of a model at its stored parameters (recomputes the Gram matrix)."""
    gram = GramCache(model.train_features, model.terms)
    K = gram.assemble(model.kernel_params, model.jitter)
    base = model.jitter if model.jitter is not None else 1e-6 * float(np.mean(np.diag(K)))
    R = robust_cholesky(K, base)
    aux = _likelihood_aux(model)
    return _elbo_value(
        model.likelihood, model.variational_mean, model.variational_chol_raw, R,
        model.train_labels, aux,
    )


def _likelihood_aux(model: GpModel):
    if model.likelihood == BERNOULLI:
        return _gh_nodes()
    if model.likelihood == SOFTMAX:
        eps = _mc_eps(model.rng_seed, (model.mc_samples, model.num_latents, model.num_train))
        return eps
    if model.likelihood == GAUSSIAN:
        targets = np.where(model.train_labels == 1, 1.0, -1.0)
        return targets, model.gaussian_noise_variance
    raise ContractError(f"unknown likelihood {model.likelihood!r}")


class _Adam:
    """Ascent with per-parameter step scaling over a list of arrays."""

    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g**2
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            p += self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _inner_solve(likelihood, m_all, raw_all, R, y, aux, iters, lr, snapshot_fn):
    """Maximise the ELBO over variational parameters; returns the best
    visited state (never worse than the warm start)."""
    adam = _Adam([m_all.shape, raw_all.shape], lr)
    best_value = -np.inf
    best = (m_all.copy(), raw_all.copy())
    for _ in range(iters):
        value, gm, gr = _elbo_and_grads(likelihood, m_all, raw_all, R, y, aux)
        if not np.isfinite(value):
            raise NumericalError("non-finite ELBO in inner solve", snapshot=snapshot_fn())
        if value > best_value:
            best_value = value
            best = (m_all.copy(), raw_all.copy())
        adam.step([m_all, raw_all], [gm, gr])
    value = _elbo_value(likelihood, m_all, raw_all, R, y, aux)
    if np.isfinite(value) and value > best_value:
        best_value = value
        best = (m_all.copy(), raw_all.copy())
    m_all[...], raw_all[...] = best
    return best_value


# ---------------------------------------------------------------------------
# fitting


def _raw_from_chol(Lq: np.ndarray) -> np.ndarray:
    raw = np.tril(Lq, -1)
    idx = np.arange(Lq.shape[-1])
    raw[idx, idx] = np.log(np.diag(Lq))
    return raw


class _HyperState:
    """Hyperparameter vector <-> (kernel params, filter banks), with
    targeted Gram reassembly for finite-difference probes.

    At a fixed variational state only the KL term of the ELBO depends on
    the hyperparameters, so every probe costs one per-term kernel matrix,
    one Cholesky, and a pair of triangular solves.
    """

    def __init__(self, kernel_params, banks, gram_cache, graphs, cache, base_jitter):
        self.kernel_params = kernel_params
        self.banks = banks
        self.gram = gram_cache
        self.graphs = graphs
        self.cache = cache
        self.base_jitter = base_jitter
        self.terms = tuple(kernel_params.terms)
        self.slices: dict[str, slice] = {}
        offset = 2 * len(self.terms)
        for term in self.terms:
            n = banks[term].num_params()
            self.slices[term] = slice(offset, offset + n)
            offset += n
        self.size = offset
        self.term_K: dict[str, np.ndarray] = {}
        self.K = np.zeros((gram_cache.n, gram_cache.n))
        self.refresh()

    def refresh(self) -> None:
        """Recompute per-term kernel matrices and their jittered sum."""
        K = np.zeros_like(self.K)
        for term in self.terms:
            Kt = kernel_from_sq_distances(self.kernel_params.terms[term], self.gram.sq_dists[term])
            self.term_K[term] = Kt
            K += Kt
        K[np.diag_indices_from(K)] += self.base_jitter
        self.K = K

    def get_theta(self) -> np.ndarray:
        parts = [self.kernel_params.get_flat()]
        parts += [self.banks[t].get_flat() for t in self.terms]
        return np.concatenate(parts)

    def _probe_term_matrix(self, index: int, value: float) -> tuple[str, np.ndarray]:
        """Kernel matrix of the single term affected by setting parameter
        ``index`` to ``value``; no internal state is touched."""
        num_kernel = 2 * len(self.terms)
        if index < num_kernel:
            term = self.terms[index // 2]
            params = self.kernel_params.terms[term].copy()
            if index % 2 == 0:
                params.log_variance = value
            else:
                params.log_lengthscale = value
            return term, kernel_from_sq_distances(params, self.gram.sq_dists[term])
        for term in self.terms:
            sl = self.slices[term]
            if sl.start <= index < sl.stop:
                bank = self.banks[term].copy()
                flat = bank.get_flat()
                flat[index - sl.start] = value
                bank.set_flat(flat)
                X = term_feature_matrix(self.graphs, term, bank, self.cache)
                sq = self.gram.sq_distance_matrix(X)
                return term, kernel_from_sq_distances(self.kernel_params.terms[term], sq)
        raise ContractError(f"hyperparameter index {index} out of range")

    def kl_probe(self, index: int, value: float, m_all, Lq_all) -> float:
        term, Kt = self._probe_term_matrix(index, value)
        K = self.K - self.term_K[term] + Kt
        return self.kl_of_K(K, m_all, Lq_all)

    def kl_full(self, theta: np.ndarray, m_all, Lq_all) -> float:
        """KL at an arbitrary hyperparameter vector, without mutating state."""
        kernel_params = self.kernel_params.copy()
        kernel_params.set_flat(theta[: 2 * len(self.terms)])
        K = np.zeros_like(self.K)
        for term in self.terms:
            sl = self.slices[term]
            if np.array_equal(theta[sl], self.banks[term].get_flat()):
                sq = self.gram.sq_dists[term]
            else:
                bank = self.banks[term].copy()
                bank.set_flat(theta[sl])
                X = term_feature_matrix(self.graphs, term, bank, self.cache)
                sq = self.gram.sq_distance_matrix(X)
            K += kernel_from_sq_distances(kernel_params.terms[term], sq)
        K[np.diag_indices_from(K)] += self.base_jitter
        return self.kl_of_K(K, m_all, Lq_all)

    def kl_of_K(self, K: np.ndarray, m_all, Lq_all) -> float:
        R = robust_cholesky(K, self.base_jitter)
        return sum(_kl_value(m, Lq, R) for m, Lq in zip(m_all, Lq_all))

    def apply_theta(self, theta: np.ndarray) -> None:
        """Adopt ``theta``: update kernel params and banks, refresh the
        distance cache for changed terms and the per-term kernel matrices."""
        self.kernel_params.set_flat(theta[: 2 * len(self.terms)])
        for term in self.terms:
            sl = self.slices[term]
            if not np.array_equal(theta[sl], self.banks[term].get_flat()):
                self.banks[term].set_flat(theta[sl])
                X = term_feature_matrix(self.graphs, term, self.banks[term], self.cache)
                self.gram.update_term_matrix(term, X)
        self.refresh()


def fit(
    dataset,
    config: TrainConfig,
    *,
    terms=None,
    cache: SpectralCache | None = None,
    num_filters: int = 4,
    num_scales: int = 3,
    kernel_family: str = "squared-exponential",
    matern_nu: float = 1.5,
    jitter: float | None = None,
) -> GpModel:
    """Train the classifier on a list of labeled complexes.

    ``terms`` defaults to the full decomposition over whichever domains
    carry features; pass ("v",), ("e",) or ("v", "e") for the merged,
    non-decomposed variant.  A shared SpectralCache avoids repeating
    eigendecompositions across seeds.  Deterministic given config.seed.
    """
    dataset = list(dataset)
    if cache is None:
        cache = SpectralCache()
    if terms is None:
        terms = active_terms(dataset, hodge=True)
    labels_raw = np.array([g.label for g in dataset])
    classes = np.unique(labels_raw)
    if classes.shape[0] < 2:
        raise ContractError("training data must contain at least two classes")
    y = np.searchsorted(classes, labels_raw)
    num_classes = classes.shape[0]
    likelihood = BERNOULLI if num_classes == 2 else SOFTMAX
    num_latents = 1 if num_classes == 2 else num_classes
    n = len(dataset)

    lam = {
        domain: max(cache.domain_lambda_max(dataset, domain), 1e-12)
        for domain in {("vertex" if t.startswith("v") else "edge") for t in terms}
    }
    banks = make_default_banks(terms, lam, num_filters, num_scales)
    features = extract_dataset_features(dataset, banks, cache)
    kernel_params = default_kernel_params(terms, features, kernel_family, matern_nu)
    gram_cache = GramCache(features, terms)

    K = gram_cache.assemble(kernel_params, jitter)
    base_jitter = jitter if jitter is not None else 1e-6 * float(np.mean(np.diag(K)))
    hyper = _HyperState(kernel_params, banks, gram_cache, dataset, cache, base_jitter)
    R = robust_cholesky(hyper.K, base_jitter)

    # start at the prior: zero mean, S = K, so the KL term starts at zero
    m_all = np.zeros((num_latents, n))
    raw_all = np.stack([_raw_from_chol(R.copy()) for _ in range(num_latents)])

    if likelihood == SOFTMAX:
        aux = _mc_eps(config.seed, (config.mc_samples, num_latents, n))
    else:
        aux = _gh_nodes()

    def snapshot():
        return {
            "theta": hyper.get_theta(),
            "variational_mean": m_all.copy(),
            "variational_chol_raw": raw_all.copy(),
        }

    trace: list[float] = []
    current = _inner_solve(
        likelihood, m_all, raw_all, R, y, aux, config.inner_iters, config.inner_lr, snapshot
    )
    trace.append(current)

    theta = hyper.get_theta()
    rms = np.zeros_like(theta)
    for _ in range(config.max_outer_iters - 1):
        Lq_all = _chol_from_raw(raw_all)
        kl_now = hyper.kl_of_K(hyper.K, m_all, Lq_all)

        grad = np.zeros_like(theta)
        h = config.fd_step
        for i in range(theta.size):
            kl_plus = hyper.kl_probe(i, theta[i] + h, m_all, Lq_all)
            kl_minus = hyper.kl_probe(i, theta[i] - h, m_all, Lq_all)
            grad[i] = -(kl_plus - kl_minus) / (2 * h)  # ELBO gradient = -dKL/dtheta
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite hyperparameter gradient", snapshot=snapshot())

        rms = 0.9 * rms + 0.1 * grad**2
        step = config.outer_lr * grad / (np.sqrt(rms) + 1e-8)
        accepted = False
        for _halving in range(4):
            candidate = theta + step
            kl_candidate = hyper.kl_full(candidate, m_all, Lq_all)
            if kl_candidate <= kl_now + 1e-12 * (1.0 + abs(kl_now)):
                theta = candidate
                accepted = True
                break
            step *= 0.5

        if accepted:
            hyper.apply_theta(theta)
            R = robust_cholesky(hyper.K, base_jitter)
        previous = current
        current = _inner_solve(
            likelihood, m_all, raw_all, R, y, aux, config.inner_iters, config.inner_lr, snapshot
        )
        trace.append(current)
        if abs(current - previous) <= config.elbo_rel_tol * max(1.0, abs(previous)):
            break

    features = extract_dataset_features(dataset, banks, cache)
    return GpModel(
        kernel_params=kernel_params,
        filter_banks=banks,
        classes=classes,
        likelihood=likelihood,
        variational_mean=m_all,
        variational_chol_raw=raw_all,
        train_features=features,
        train_labels=y,
        rng_seed=config.seed,
        mc_samples=config.mc_samples,
        jitter=base_jitter,
        elbo_trace=trace,
    )


# ---------------------------------------------------------------------------
# prediction


def _latent_predictive(model: GpModel, feats_test):
    """Mean and variance of q(f*) per latent: N(k* K^-1 m,
    k** - k*^T K^-1 k* + k*^T K^-1 S K^-1 k*)."""
    gram = GramCache(model.train_features, model.terms)
    K = gram.assemble(model.kernel_params, model.jitter)
    base = model.jitter if model.jitter is not None else 1e-6 * float(np.mean(np.diag(K)))
    R = robust_cholesky(K, base)
    Kstar = cross_gram(model.kernel_params, feats_test, model.train_features)
    kss = diag_gram(model.kernel_params, feats_test)
    V = solve_triangular(R, Kstar.T, lower=True)  # (N, T)
    W = solve_triangular(R.T, V, lower=False)  # K^-1 k*
    Lq_all = model.variational_chol()
    means = np.empty((model.num_latents, len(feats_test)))
    variances = np.empty_like(means)
    for latent in range(model.num_latents):
        alpha = solve_triangular(R, model.variational_mean[latent], lower=True)
        means[latent] = V.T @ alpha
        B = Lq_all[latent].T @ W
        variances[latent] = kss - np.sum(V**2, axis=0) + np.sum(B**2, axis=0)
    return means, variances


def predict_proba(model: GpModel, graphs, cache: SpectralCache | None = None) -> np.ndarray:
    """Class-probability rows (aligned with ``model.classes``) per graph."""
    if model.likelihood == GAUSSIAN:
        raise ContractError("the Gaussian surrogate likelihood has no class probabilities")
    graphs = list(graphs)
    if cache is None:
        cache = SpectralCache()
    feats = extract_dataset_features(graphs, model.filter_banks, cache)
    for f in feats:
        for term in model.terms:
            if f.vector(term).shape != model.train_features[0].vector(term).shape:
                raise ContractError(
                    f"test graph features on term {term!r} do not match training shape"
                )
    means, variances = _latent_predictive(model, feats)
    sds = np.sqrt(variances)
    if model.likelihood == BERNOULLI:
        nodes, weights = _gh_nodes()
        A = means[0][:, None] + np.sqrt(2.0) * sds[0][:, None] * nodes[None, :]
        p1 = np.clip(expit(A) @ weights, 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])
    draws = np.random.default_rng([model.rng_seed, 9337]).standard_normal(
        (PREDICT_SAMPLES, model.num_latents, len(graphs))
    )
    F = means[None, :, :] + sds[None, :, :] * draws
    P = np.exp(F - logsumexp(F, axis=1)[:, None, :])
    return P.mean(axis=0).T


def predict_labels(model: GpModel, graphs, cache: SpectralCache | None = None) -> np.ndarray:
    probs = predict_proba(model, graphs, cache)
    return model.classes[np.argmax(probs, axis=1)]


def latent_predictive(model: GpModel, graphs, cache: SpectralCache | None = None):
    """Latent predictive means and variances (num_latents, num_graphs)."""
    if cache is None:
        cache = SpectralCache()
    feats = extract_dataset_features(list(graphs), model.filter_banks, cache)
    return _latent_predictive(model, feats)


# ---------------------------------------------------------------------------
# serialization

SNAPSHOT_VERSION = 1


def save_model(model: GpModel, path) -> None:
    """Versioned snapshot of every parameter vector plus the seed; the
    round-trip is bit-exact."""
    arrays: dict[str, np.ndarray] = {
        "classes": model.classes,
        "variational_mean": model.variational_mean,
        "variational_chol_raw": model.variational_chol_raw,
        "train_labels": model.train_labels,
        "kernel_flat": model.kernel_params.get_flat(),
        "elbo_trace": np.array(model.elbo_trace),
        "scalars": np.array(
            [
                float(model.rng_seed),
                float(model.mc_samples),
                -1.0 if model.jitter is None else model.jitter,
                model.gaussian_noise_variance,
            ]
        ),
    }
    meta = {
        "version": SNAPSHOT_VERSION,
        "likelihood": model.likelihood,
        "terms": list(model.terms),
        "kernel": {
            t: {"family": p.family, "nu": p.nu} for t, p in model.kernel_params.terms.items()
        },
        "banks": {
            t: {"domain": b.domain, "mother_width": b.mother_width}
            for t, b in model.filter_banks.items()
        },
    }
    for term, bank in model.filter_banks.items():
        arrays[f"bank_{term}_scaling"] = bank.log_scaling_scale
        arrays[f"bank_{term}_wavelet"] = bank.log_wavelet_scales
    for term in model.terms:
        arrays[f"feat_{term}"] = np.vstack([f.vector(term) for f in model.train_features])
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_model(path) -> GpModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != SNAPSHOT_VERSION:
            raise ContractError(f"unsupported snapshot version {meta['version']}")
        from .kernel import TermParams  # local import to avoid cycle at module load

        terms = list(meta["terms"])
        kernel_params = KernelParams(
            {
                t: TermParams(meta["kernel"][t]["family"], 0.0, 0.0, meta["kernel"][t]["nu"])
                for t in terms
            }
        )
        kernel_params.set_flat(data["kernel_flat"])
        banks = {}
        for t in terms:
            banks[t] = FilterBank(
                meta["banks"][t]["domain"],
                data[f"bank_{t}_scaling"],
                data[f"bank_{t}_wavelet"],
                meta["banks"][t]["mother_width"],
            )
        n = data["variational_mean"].shape[1]
        feats = []
        for i in range(n):
            feats.append(
                HodgeletFeatures({t: data[f"feat_{t}"][i].copy() for t in terms})
            )
        scalars = data["scalars"]
        return GpModel(
            kernel_params=kernel_params,
            filter_banks=banks,
            classes=data["classes"].copy(),
            likelihood=meta["likelihood"],
            variational_mean=data["variational_mean"].copy(),
            variational_chol_raw=data["variational_chol_raw"].copy(),
            train_features=feats,
            train_labels=data["train_labels"].copy(),
            rng_seed=int(scalars[0]),
            mc_samples=int(scalars[1]),
            jitter=None if scalars[2] < 0 else float(scalars[2]),
            gaussian_noise_variance=float(scalars[3]),
            elbo_trace=list(data["elbo_trace"]),
        )
