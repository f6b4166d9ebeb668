"""Variational Bayesian inference of the simplex weight vector.

A Dirichlet variational family approximates the posterior over the weight
vector under a Bradley-Terry likelihood of strict pairwise comparisons.
The ELBO is maximized with Adam using either the score-function gradient
estimator or the lower-variance reparameterization (RT) estimator, which
pushes Gaussian noise through a softmax transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .core import PerformanceTable, PreferenceSet, characteristic_matrix

__all__ = [
    "DirichletParams",
    "PhiVector",
    "OptimizerConfig",
    "PosteriorSamples",
    "FitResult",
    "InferenceContext",
    "ROLLOUT_CONFIG",
    "log_prior",
    "log_likelihood",
    "elbo_estimate",
    "score_gradient",
    "rt_transform",
    "rt_gradient",
    "fit_posterior",
    "sample_posterior",
    "posterior_predictive",
    "posterior_variance",
    "export_posterior",
]

_INTERIOR_EPS = 1e-12


@dataclass(frozen=True)
class DirichletParams:
    params: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.params, dtype=float)
        object.__setattr__(self, "params", p)
        if (p <= 0).any():
            raise ValueError("Dirichlet parameters must be strictly positive")

    @property
    def dim(self) -> int:
        return self.params.shape[0]


@dataclass(frozen=True)
class PhiVector:
    """Auxiliary unconstrained parameterization, theta = phi**2."""

    phi: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "phi", p)
        if (p == 0).any():
            raise ValueError("phi entries must be nonzero so that theta > 0")

    @property
    def theta(self) -> np.ndarray:
        return self.phi**2


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    grad_samples: int = 10_000
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.grad_samples < 1 or self.learning_rate <= 0:
            raise ValueError("max_iters, grad_samples and learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")


#: Reduced budget used inside MCTS rollouts and hypothetical refits.
ROLLOUT_CONFIG = OptimizerConfig(max_iters=100, grad_samples=1000)


@dataclass(frozen=True)
class PosteriorSamples:
    samples: np.ndarray  # W x gamma
    source_params: DirichletParams


@dataclass(frozen=True)
class FitResult:
    theta: DirichletParams
    elbo_trace: tuple[float, ...]
    config: OptimizerConfig
    estimator: str


def _params(x) -> np.ndarray:
    if isinstance(x, DirichletParams):
        return x.params
    if isinstance(x, PhiVector):
        return x.phi
    return np.asarray(x, dtype=float)


def _interior(u: np.ndarray) -> np.ndarray:
    """Nudge samples off the simplex boundary before log-density evaluation."""
    u = np.clip(u, _INTERIOR_EPS, None)
    return u / u.sum(axis=-1, keepdims=True)


def _log_dirichlet(u: np.ndarray, params: np.ndarray) -> np.ndarray:
    const = gammaln(params.sum()) - gammaln(params).sum()
    return const + (np.log(u) * (params - 1.0)).sum(axis=-1)


def log_prior(u, alpha, on_boundary: Literal["error", "neginf"] = "neginf") -> float:
    """Dirichlet log-density log Dir(u | alpha)."""
    u = np.asarray(u, dtype=float)
    alpha = _params(alpha)
    if (u <= 0).any():
        if on_boundary == "error":
            raise ValueError("u must lie in the simplex interior")
        if (alpha > 1).any() or (alpha < 1).any():
            return -np.inf
        u = _interior(u)
    return float(_log_dirichlet(u, alpha))


def _statement_diffs(Q: PreferenceSet, V: np.ndarray) -> np.ndarray:
    """d x gamma matrix of V(preferred) - V(other) per statement."""
    if len(Q) == 0:
        return np.zeros((0, V.shape[1]))
    return np.stack([V[s.preferred] - V[s.other] for s in Q])


def _log_likelihood_batch(u: np.ndarray, diffs: np.ndarray) -> np.ndarray:
    """Bradley-Terry log-likelihood for each sample row of u."""
    if diffs.shape[0] == 0:
        return np.zeros(u.shape[:-1])
    du = u @ diffs.T
    return -np.logaddexp(0.0, -du).sum(axis=-1)


def log_likelihood(Q: PreferenceSet, u, table: PerformanceTable) -> float:
    u = np.asarray(u, dtype=float)
    V = characteristic_matrix(table)
    return float(_log_likelihood_batch(u, _statement_diffs(Q, V)))


def _elbo_terms(u: np.ndarray, diffs: np.ndarray, alpha: np.ndarray, q_params: np.ndarray) -> np.ndarray:
    """Per-sample log p(Q|u) + log p(u|alpha) - log q(u|q_params)."""
    return (
        _log_likelihood_batch(u, diffs)
        + _log_dirichlet(u, alpha)
        - _log_dirichlet(u, q_params)
    )


def elbo_estimate(theta, Q: PreferenceSet, alpha, table: PerformanceTable, W: int, rng: np.random.Generator) -> float:
    theta = _params(theta)
    alpha = _params(alpha)
    u = _interior(rng.dirichlet(theta, size=W))
    diffs = _statement_diffs(Q, characteristic_matrix(table))
    return float(_elbo_terms(u, diffs, alpha, theta).mean())


def _dirichlet_score(u: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """grad_theta log Dir(u | theta), per sample row."""
    return digamma(theta.sum()) - digamma(theta) + np.log(u)


def _dirichlet_kl(theta: np.ndarray, alpha: np.ndarray) -> float:
    """Closed-form KL( Dir(theta) || Dir(alpha) )."""
    t0, a0 = theta.sum(), alpha.sum()
    return float(
        gammaln(t0) - gammaln(theta).sum()
        - gammaln(a0) + gammaln(alpha).sum()
        + ((theta - alpha) * (digamma(theta) - digamma(t0))).sum()
    )


def _dirichlet_kl_grad(theta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """grad_theta KL( Dir(theta) || Dir(alpha) )."""
    diff = theta - alpha
    return diff * polygamma(1, theta) - polygamma(1, theta.sum()) * diff.sum()


def score_gradient(theta, Q: PreferenceSet, alpha, table: PerformanceTable, W: int, rng: np.random.Generator) -> np.ndarray:
    """Score-function Monte Carlo estimate of grad_theta ELBO (averaged)."""
    theta = _params(theta)
    alpha = _params(alpha)
    u = _interior(rng.dirichlet(theta, size=W))
    diffs = _statement_diffs(Q, characteristic_matrix(table))
    return _score_gradient_from_samples(u, theta, alpha, diffs)


def _score_gradient_from_samples(u: np.ndarray, theta: np.ndarray, alpha: np.ndarray, diffs: np.ndarray) -> np.ndarray:
    weights = _elbo_terms(u, diffs, alpha, theta)
    score = _dirichlet_score(u, theta)
    return (score * weights[:, None]).mean(axis=0)


def rt_transform(phi, epsilon) -> np.ndarray:
    """Map standard-normal noise to (approximate) Dirichlet(phi^2) samples.

    softmax(mu + sqrt(Sigma) * eps) with the softmax-Gaussian moment
    matching of the Dirichlet; works on batched epsilon (last axis gamma).
    """
    phi = _params(phi)
    epsilon = np.asarray(epsilon, dtype=float)
    gamma = phi.shape[0]
    t = np.log(phi**2)
    mu = t - t.mean()
    inv = 1.0 / phi**2
    sigma = inv * (1.0 - 2.0 / gamma) + inv.mean() / gamma
    z = mu + np.sqrt(sigma) * epsilon
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _rt_value_and_grad(
    phi: np.ndarray,
    epsilon: np.ndarray,
    diffs: np.ndarray,
    alpha: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Reparameterized ELBO estimate and its exact gradient w.r.t. phi.

    The likelihood expectation is a Monte Carlo pathwise term through the
    softmax transform; the prior/entropy part is the closed-form Dirichlet
    KL, so the gradient matches finite differences of the objective under
    common noise and vanishes at the prior when Q is empty.
    """
    gamma = phi.shape[0]
    theta = phi**2
    inv = 1.0 / theta
    t = np.log(theta)
    mu = t - t.mean()
    sigma = inv * (1.0 - 2.0 / gamma) + inv.mean() / gamma
    s = np.sqrt(sigma)
    z = mu + s * epsilon
    zs = z - z.max(axis=-1, keepdims=True)
    e = np.exp(zs)
    u = e / e.sum(axis=-1, keepdims=True)
    u = _interior(u)

    kl = _dirichlet_kl(theta, alpha)
    value = float(_log_likelihood_batch(u, diffs).mean()) - kl

    # grad of the per-sample log-likelihood w.r.t. u
    if diffs.shape[0] == 0:
        pathwise = np.zeros((epsilon.shape[0], gamma))
    else:
        du = u @ diffs.T
        g_u = (1.0 / (1.0 + np.exp(du))) @ diffs
        # softmax backward: gz_k = u_k * (g_u_k - sum_i u_i g_u_i)
        gz = u * (g_u - (u * g_u).sum(axis=-1, keepdims=True))
        # z = mu(phi) + s(phi) * eps
        # dmu_k/dphi_l = (2/phi_l) (delta_kl - 1/gamma)
        # dSigma_k/dphi_l = -2(1 - 2/gamma)/phi_l^3 delta_kl - 2/(gamma^2 phi_l^3)
        h = gz * epsilon / (2.0 * s)
        sum_h = h.sum(axis=-1, keepdims=True)
        pathwise = (
            2.0 / phi * (gz - gz.sum(axis=-1, keepdims=True) / gamma)
            + (-2.0 * (1.0 - 2.0 / gamma) * h - 2.0 / gamma**2 * sum_h) / phi**3
        )

    grad = pathwise.mean(axis=0) - 2.0 * phi * _dirichlet_kl_grad(theta, alpha)
    return value, grad


def rt_objective(phi, epsilon, Q: PreferenceSet, alpha, table: PerformanceTable) -> float:
    """ELBO under fixed noise (Monte Carlo likelihood minus closed-form KL);
    the objective rt_gradient differentiates."""
    phi = _params(phi)
    alpha = _params(alpha)
    u = _interior(rt_transform(phi, epsilon))
    diffs = _statement_diffs(Q, characteristic_matrix(table))
    lik = float(_log_likelihood_batch(u, diffs).mean())
    return lik - _dirichlet_kl(phi**2, alpha)


def rt_gradient(phi, Q: PreferenceSet, alpha, table: PerformanceTable, W: int, rng: np.random.Generator) -> np.ndarray:
    phi = _params(phi)
    alpha = _params(alpha)
    epsilon = rng.standard_normal((W, phi.shape[0]))
    diffs = _statement_diffs(Q, characteristic_matrix(table))
    _, grad = _rt_value_and_grad(phi, epsilon, diffs, alpha)
    return grad


def fit_posterior(
    Q: PreferenceSet,
    alpha,
    table: PerformanceTable,
    config: OptimizerConfig,
    estimator: Literal["score", "rt"] = "rt",
    init_theta=None,
    diffs: np.ndarray | None = None,
) -> FitResult:
    """Adam ascent on the ELBO; returns the fitted Dirichlet parameters.

    Deterministic given (Q, config, estimator, init). `diffs` lets callers
    pass a precomputed statement-difference matrix.
    """
    alpha = _params(alpha)
    gamma = alpha.shape[0]
    if diffs is None:
        diffs = _statement_diffs(Q, characteristic_matrix(table))
    rng = np.random.default_rng(config.rng_seed)

    phi = np.ones(gamma) if init_theta is None else np.sqrt(_params(init_theta))
    m = np.zeros(gamma)
    v = np.zeros(gamma)
    trace: list[float] = []
    for it in range(1, config.max_iters + 1):
        if estimator == "rt":
            epsilon = rng.standard_normal((config.grad_samples, gamma))
            elbo, grad = _rt_value_and_grad(phi, epsilon, diffs, alpha)
        elif estimator == "score":
            theta = phi**2
            u = _interior(rng.dirichlet(theta, size=config.grad_samples))
            elbo = float(_elbo_terms(u, diffs, alpha, theta).mean())
            grad = _score_gradient_from_samples(u, theta, alpha, diffs) * 2.0 * phi
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        if not np.isfinite(grad).all():
            raise RuntimeError(
                f"non-finite gradient at iteration {it} (estimator={estimator}, phi={phi})"
            )
        trace.append(elbo)
        m = config.beta1 * m + (1 - config.beta1) * grad
        v = config.beta2 * v + (1 - config.beta2) * grad**2
        m_hat = m / (1 - config.beta1**it)
        v_hat = v / (1 - config.beta2**it)
        phi = phi + config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        # keep theta = phi^2 strictly positive
        phi = np.where(np.abs(phi) < 1e-6, 1e-6, phi)

    return FitResult(DirichletParams(phi**2), tuple(trace), config, estimator)


def sample_posterior(theta, W: int, rng: np.random.Generator) -> PosteriorSamples:
    params = DirichletParams(_params(theta))
    return PosteriorSamples(rng.dirichlet(params.params, size=W), params)


def _win_fraction(ua: np.ndarray, ub: np.ndarray) -> float:
    """Fraction of samples with ua > ub; exact ties contribute half."""
    return float(np.mean((ua > ub) + 0.5 * (ua == ub)))


def posterior_predictive(
    theta, table: PerformanceTable, a_i: int, a_j: int, W: int, rng: np.random.Generator
) -> float:
    if a_i == a_j:
        raise ValueError("predictive requires two distinct alternatives")
    samples = sample_posterior(theta, W, rng).samples
    V = characteristic_matrix(table)
    utilities = samples @ V[[a_i, a_j]].T
    return _win_fraction(utilities[:, 0], utilities[:, 1])


def posterior_variance(theta) -> float:
    """Trace of the Dirichlet covariance (sum of coordinate variances)."""
    t = _params(theta)
    t0 = t.sum()
    return float((t * (t0 - t)).sum() / (t0**2 * (t0 + 1)))


def export_posterior(fit: FitResult, alpha) -> dict:
    return {
        "theta": fit.theta.params.tolist(),
        "alpha": _params(alpha).tolist(),
        "elbo_trace": list(fit.elbo_trace),
        "seed": fit.config.rng_seed,
        "config": {
            "max_iters": fit.config.max_iters,
            "grad_samples": fit.config.grad_samples,
            "learning_rate": fit.config.learning_rate,
            "beta1": fit.config.beta1,
            "beta2": fit.config.beta2,
            "eps": fit.config.eps,
            "estimator": fit.estimator,
        },
    }


@dataclass
class InferenceContext:
    """Bundles a table with inference budgets, seeding and fit caching.

    Seeds derive deterministically from (base_seed, purpose tag, statement
    encoding), so repeated fits of the same preference set are cached and
    independent runs are reproducible.
    """

    table: PerformanceTable
    alpha: np.ndarray | None = None
    full_config: OptimizerConfig = field(default_factory=OptimizerConfig)
    rollout_config: OptimizerConfig = field(default_factory=lambda: ROLLOUT_CONFIG)
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha is None:
            self.alpha = np.ones(self.table.gamma)
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.V = characteristic_matrix(self.table)
        self._fit_cache: dict = {}
        self._pwi_cache: dict = {}

    def _seed(self, tag: int, key: tuple[int, ...]) -> int:
        ss = np.random.SeedSequence([self.base_seed, tag, *key])
        return int(ss.generate_state(1)[0])

    def diffs(self, Q: PreferenceSet) -> np.ndarray:
        return _statement_diffs(Q, self.V)

    def fit(
        self,
        Q: PreferenceSet,
        budget: Literal["full", "rollout"] = "full",
        estimator: Literal["score", "rt"] = "rt",
        init_theta=None,
    ) -> FitResult:
        init_key = None if init_theta is None else tuple(np.round(_params(init_theta), 12))
        cache_key = (Q.key(), budget, estimator, init_key)
        hit = self._fit_cache.get(cache_key)
        if hit is not None:
            return hit
        base = self.full_config if budget == "full" else self.rollout_config
        config = replace(base, rng_seed=self._seed(1 if budget == "full" else 2, Q.key()))
        fit = fit_posterior(
            Q, self.alpha, self.table, config, estimator=estimator,
            init_theta=init_theta, diffs=self.diffs(Q),
        )
        self._fit_cache[cache_key] = fit
        return fit

    def samples(self, theta, W: int, seed_key: tuple[int, ...] = ()) -> PosteriorSamples:
        rng = np.random.default_rng(self._seed(3, seed_key))
        return sample_posterior(theta, W, rng)

    def utilities(self, samples: PosteriorSamples) -> np.ndarray:
        return samples.samples @ self.V.T

    def pwi(self, Q: PreferenceSet, W: int, budget: Literal["full", "rollout"] = "rollout",
            estimator: Literal["score", "rt"] = "rt") -> np.ndarray:
        """PWI matrix from the fitted posterior of Q (cached)."""
        cache_key = (Q.key(), W, budget, estimator)
        hit = self._pwi_cache.get(cache_key)
        if hit is not None:
            return hit
        fit = self.fit(Q, budget=budget, estimator=estimator)
        utilities = self.utilities(self.samples(fit.theta.params, W, Q.key()))
        from .metrics import pwi_from_utilities

        mat = pwi_from_utilities(utilities)
        self._pwi_cache[cache_key] = mat
        return mat
