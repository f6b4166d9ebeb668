"""Shared fixtures and independent oracles (quadrature, finite differences)."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import digamma, gammaln

from prefelicit.core import (
    Criterion,
    PerformanceTable,
    PreferenceSet,
    characteristic_matrix,
)
from prefelicit.simulation import gen_comparisons, gen_performance_table, gen_true_model


# ---------------------------------------------------------------------------
# instances


def gamma2_table(n: int, seed: int) -> PerformanceTable:
    """n alternatives on 2 single-segment criteria: model dimension 2."""
    return gen_performance_table(n, 2, np.random.default_rng(seed), subintervals=1)


def gamma2_instance(n: int, seed: int, n_statements: int):
    """Table plus consistent comparisons from a random true model."""
    rng = np.random.default_rng(seed)
    table = gen_performance_table(n, 2, rng, subintervals=1)
    model = gen_true_model(2, "mixture", rng)
    Q = (
        gen_comparisons(model, table, n_statements, rng)
        if n_statements
        else PreferenceSet()
    )
    return table, Q, model


@pytest.fixture
def small_table() -> PerformanceTable:
    return PerformanceTable(
        ("a", "b", "c"),
        (Criterion("g1", 0.0, 1.0, 1), Criterion("g2", 0.0, 1.0, 1)),
        np.array([[0.9, 0.2], [0.3, 0.8], [0.6, 0.6]]),
    )


# ---------------------------------------------------------------------------
# quadrature oracles on the 1-simplex (model dimension 2)


def simplex1_grid(npts: int = 201):
    """Grid u = (t, 1-t) with trapezoid weights."""
    t = np.linspace(0.0, 1.0, npts)
    u = np.stack([t, 1.0 - t], axis=1)
    w = np.ones(npts)
    w[0] = w[-1] = 0.5
    w /= w.sum()
    return u, w


def quad_log_likelihood(Q: PreferenceSet, table: PerformanceTable, u: np.ndarray) -> np.ndarray:
    V = characteristic_matrix(table)
    ll = np.zeros(u.shape[0])
    for s in Q:
        du = u @ (V[s.preferred] - V[s.other])
        ll += -np.logaddexp(0.0, -du)
    return ll


def quad_posterior_weights(Q: PreferenceSet, table: PerformanceTable, npts: int = 201):
    """Normalized exact-posterior weights on the grid (uniform prior)."""
    u, w = simplex1_grid(npts)
    ll = quad_log_likelihood(Q, table, u)
    post = w * np.exp(ll - ll.max())
    return u, post / post.sum()


def quad_win_matrix(utilities: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """P(U_i > U_j) (ties split) under a weighted grid of utility rows."""
    n = utilities.shape[1]
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                wins = (utilities[:, i] > utilities[:, j]) + 0.5 * (
                    utilities[:, i] == utilities[:, j]
                )
                P[i, j] = float(np.sum(weights * wins))
    return P


def quad_posterior_win_matrix(Q: PreferenceSet, table: PerformanceTable, npts: int = 201):
    u, w = quad_posterior_weights(Q, table, npts)
    return quad_win_matrix(u @ characteristic_matrix(table).T, w)


# ---------------------------------------------------------------------------
# differentiation / density oracles


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x, dtype=float)
    for k in range(x.shape[0]):
        e = np.zeros_like(x, dtype=float)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def dirichlet_logpdf(u: np.ndarray, params: np.ndarray) -> np.ndarray:
    const = gammaln(params.sum()) - gammaln(params).sum()
    return const + (np.log(u) * (params - 1.0)).sum(axis=-1)


def dirichlet_kl(theta: np.ndarray, alpha: np.ndarray) -> float:
    t0, a0 = theta.sum(), alpha.sum()
    return float(
        gammaln(t0)
        - gammaln(theta).sum()
        - gammaln(a0)
        + gammaln(alpha).sum()
        + ((theta - alpha) * (digamma(theta) - digamma(t0))).sum()
    )


def score_surrogate(theta: np.ndarray, u: np.ndarray, Q: PreferenceSet,
                    alpha: np.ndarray, table: PerformanceTable) -> float:
    """Fixed-sample surrogate whose exact theta-gradient is the score estimate."""
    V = characteristic_matrix(table)
    ll = np.zeros(u.shape[0])
    for s in Q:
        du = u @ (V[s.preferred] - V[s.other])
        ll += -np.logaddexp(0.0, -du)
    lq = dirichlet_logpdf(u, theta)
    lp = dirichlet_logpdf(u, alpha)
    return float(np.mean(lq * (ll + lp) - 0.5 * lq**2))
