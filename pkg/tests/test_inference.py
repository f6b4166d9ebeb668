import json

import numpy as np
import pytest

from prefelicit.core import (
    Criterion,
    PerformanceTable,
    PreferenceSet,
    PreferenceStatement,
    characteristic_matrix,
)
from prefelicit.inference import (
    DirichletParams,
    InferenceContext,
    OptimizerConfig,
    PhiVector,
    ROLLOUT_CONFIG,
    elbo_estimate,
    export_posterior,
    fit_posterior,
    log_likelihood,
    log_prior,
    posterior_predictive,
    posterior_variance,
    rt_gradient,
    rt_objective,
    rt_transform,
    sample_posterior,
    score_gradient,
)

from conftest import (
    central_difference,
    dirichlet_kl,
    gamma2_instance,
    gamma2_table,
    quad_posterior_weights,
    quad_win_matrix,
    score_surrogate,
    simplex1_grid,
)


def unit_gain_table():
    """Two alternatives with U(a) - U(b) = 1 for every simplex weight."""
    return PerformanceTable(
        ("a", "b"), (Criterion("g", 0.0, 1.0, 1),), np.array([[1.0], [0.0]])
    )


class TestParamTypes:
    def test_dirichlet_params_positive(self):
        with pytest.raises(ValueError):
            DirichletParams(np.array([1.0, 0.0]))

    def test_phi_nonzero(self):
        with pytest.raises(ValueError):
            PhiVector(np.array([1.0, 0.0]))
        assert np.allclose(PhiVector(np.array([-2.0, 3.0])).theta, [4.0, 9.0])

    def test_optimizer_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(max_iters=0)
        with pytest.raises(ValueError):
            OptimizerConfig(beta1=1.0)
        assert ROLLOUT_CONFIG.max_iters == 100
        assert ROLLOUT_CONFIG.grad_samples == 1000


class TestLogPrior:
    def test_flat_prior_constant(self):
        from scipy.special import gammaln

        for gamma in (2, 3, 5):
            u = np.random.default_rng(0).dirichlet(np.ones(gamma))
            assert log_prior(u, np.ones(gamma)) == pytest.approx(float(gammaln(gamma)))

    def test_closed_form_value(self):
        assert log_prior(np.array([0.5, 0.5]), np.array([2.0, 2.0])) == pytest.approx(np.log(1.5))

    def test_flatness(self):
        a = log_prior(np.array([0.3, 0.7]), np.ones(2))
        b = log_prior(np.array([0.9, 0.1]), np.ones(2))
        assert a == pytest.approx(b)

    def test_boundary_handling(self):
        u = np.array([0.0, 1.0])
        with pytest.raises(ValueError):
            log_prior(u, np.ones(2), on_boundary="error")
        assert log_prior(u, np.array([2.0, 2.0])) == -np.inf
        assert np.isfinite(log_prior(u, np.ones(2)))  # flat prior: boundary is harmless


class TestLogLikelihood:
    def test_empty_set(self, small_table):
        assert log_likelihood(PreferenceSet(), np.array([0.5, 0.5]), small_table) == 0.0

    def test_tied_utilities(self):
        table = PerformanceTable(
            ("a", "b"), (Criterion("g", 0, 1, 1),), np.array([[0.4], [0.4]])
        )
        Q = PreferenceSet((PreferenceStatement(0, 1),))
        assert log_likelihood(Q, np.array([1.0]), table) == pytest.approx(np.log(0.5))

    def test_unit_gap(self):
        Q = PreferenceSet((PreferenceStatement(0, 1),))
        val = log_likelihood(Q, np.array([1.0]), unit_gain_table())
        assert val == pytest.approx(-np.log1p(np.exp(-1.0)), abs=1e-12)
        assert val == pytest.approx(-0.31326, abs=1e-5)

    def test_flipping_statement_complements(self, small_table):
        u = np.array([0.3, 0.7])
        s = PreferenceStatement(0, 1)
        a = log_likelihood(PreferenceSet((s,)), u, small_table)
        b = log_likelihood(PreferenceSet((s.flipped(),)), u, small_table)
        assert np.exp(a) + np.exp(b) == pytest.approx(1.0)


class TestElboEstimate:
    def test_zero_at_prior(self, small_table):
        rng = np.random.default_rng(0)
        est = elbo_estimate(np.ones(2), PreferenceSet(), np.ones(2), small_table, 50_000, rng)
        assert abs(est) < 0.02

    def test_matches_closed_form_kl(self, small_table):
        theta = np.array([3.0, 1.5])
        alpha = np.ones(2)
        rng = np.random.default_rng(1)
        est = elbo_estimate(theta, PreferenceSet(), alpha, small_table, 200_000, rng)
        assert est == pytest.approx(-dirichlet_kl(theta, alpha), abs=0.02)

    def test_lower_bounds_log_evidence(self):
        table, Q, _ = gamma2_instance(4, seed=5, n_statements=4)
        u, w = simplex1_grid(2001)
        from conftest import quad_log_likelihood

        evidence = float(np.log(np.sum(w * np.exp(quad_log_likelihood(Q, table, u)))))
        for theta in (np.ones(2), np.array([2.0, 0.7]), np.array([0.5, 3.0])):
            est = elbo_estimate(theta, Q, np.ones(2), table, 100_000, np.random.default_rng(2))
            assert est <= evidence + 0.02


class TestScoreGradient:
    def test_zero_expectation_at_prior(self, small_table):
        grads = [
            score_gradient(np.ones(2), PreferenceSet(), np.ones(2), small_table, 500,
                           np.random.default_rng(k))
            for k in range(20)
        ]
        assert np.abs(np.mean(grads, axis=0)).max() < 1e-12

    @pytest.mark.parametrize("gamma,n", [(2, 4), (3, 5)])
    def test_matches_surrogate_finite_differences(self, gamma, n):
        rng = np.random.default_rng(gamma * 7)
        table = PerformanceTable(
            tuple(f"a{i}" for i in range(n)),
            tuple(Criterion(f"g{j}", 0.0, 1.0, 1) for j in range(gamma)),
            rng.uniform(0, 1, size=(n, gamma)),
        )
        Q = PreferenceSet((PreferenceStatement(0, 1), PreferenceStatement(2, 1)))
        alpha = np.ones(gamma)
        for trial in range(3):
            theta = np.exp(rng.normal(0, 0.4, gamma))
            seed = 100 + trial
            grad = score_gradient(theta, Q, alpha, table, 300, np.random.default_rng(seed))
            u = np.random.default_rng(seed).dirichlet(theta, size=300)
            u = np.clip(u, 1e-12, None)
            u /= u.sum(axis=1, keepdims=True)
            fd = central_difference(
                lambda th: score_surrogate(th, u, Q, alpha, table), theta, h=1e-6
            )
            rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)
            assert rel.max() < 1e-3


class TestRtTransform:
    def test_zero_noise_uniform(self):
        for gamma in (2, 4):
            out = rt_transform(np.full(gamma, 1.7), np.zeros(gamma))
            assert np.allclose(out, 1.0 / gamma)

    def test_hand_example(self):
        out = rt_transform(np.array([1.0, 1.0]), np.array([1.0, -1.0]))
        assert np.allclose(out, [0.80442968, 0.19557032], atol=1e-6)

    def test_batched_rows_on_simplex(self):
        eps = np.random.default_rng(0).standard_normal((100, 3))
        out = rt_transform(np.array([1.5, 0.8, 1.1]), eps)
        assert out.shape == (100, 3)
        assert np.allclose(out.sum(axis=1), 1.0)
        assert (out > 0).all()

    def test_moment_agreement_with_dirichlet(self):
        # The softmax-Gaussian construction carries a small systematic bias on
        # the largest coordinate (~0.021 here), so the bound reflects bias
        # plus Monte Carlo error rather than sampling error alone.
        phi = np.sqrt(np.array([3.0, 2.0, 1.0]))
        eps = np.random.default_rng(123).standard_normal((100_000, 3))
        mean = rt_transform(phi, eps).mean(axis=0)
        target = np.array([3.0, 2.0, 1.0]) / 6.0
        assert np.abs(mean - target).max() < 0.025


class TestRtGradient:
    @pytest.mark.parametrize("gamma,n", [(2, 4), (3, 5)])
    def test_matches_objective_finite_differences(self, gamma, n):
        rng = np.random.default_rng(gamma * 13)
        table = PerformanceTable(
            tuple(f"a{i}" for i in range(n)),
            tuple(Criterion(f"g{j}", 0.0, 1.0, 1) for j in range(gamma)),
            rng.uniform(0, 1, size=(n, gamma)),
        )
        Q = PreferenceSet((PreferenceStatement(1, 0), PreferenceStatement(2, 3)))
        alpha = np.ones(gamma)
        for trial in range(3):
            phi = np.exp(rng.normal(0, 0.3, gamma))
            seed = 300 + trial
            eps = np.random.default_rng(seed).standard_normal((400, gamma))
            grad = rt_gradient(phi, Q, alpha, table, 400, np.random.default_rng(seed))
            fd = central_difference(
                lambda p: rt_objective(p, eps, Q, alpha, table), phi, h=1e-5
            )
            rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)
            assert rel.max() < 1e-3

    def test_zero_at_prior_without_data(self, small_table):
        grad = rt_gradient(np.ones(2), PreferenceSet(), np.ones(2), small_table, 200,
                           np.random.default_rng(0))
        assert np.abs(grad).max() < 1e-12

    def test_lower_variance_than_score(self):
        table, Q, _ = gamma2_instance(6, seed=3, n_statements=8)
        phi = np.array([1.2, 0.9])
        theta = phi**2
        alpha = np.ones(2)
        rt = np.stack([
            rt_gradient(phi, Q, alpha, table, 1000, np.random.default_rng(1000 + r))
            for r in range(100)
        ])
        sc = np.stack([
            score_gradient(theta, Q, alpha, table, 1000, np.random.default_rng(2000 + r)) * 2 * phi
            for r in range(100)
        ])
        assert (rt.var(axis=0) * 10 < sc.var(axis=0)).all()


class TestFitPosterior:
    def test_empty_set_stays_at_prior(self, small_table):
        cfg = OptimizerConfig(max_iters=200, grad_samples=500, rng_seed=0)
        for estimator in ("rt", "score"):
            fit = fit_posterior(PreferenceSet(), np.ones(2), small_table, cfg, estimator=estimator)
            assert np.abs(fit.theta.params - 1.0).max() < 0.1

    def test_consistent_statements_shift_mass(self):
        # orient 20 comparisons by a model that puts 90% weight on coordinate 1
        rng = np.random.default_rng(8)
        table = gamma2_table(10, seed=8)
        V = characteristic_matrix(table)
        truth = V @ np.array([0.9, 0.1])
        statements = []
        pairs = [(i, j) for i in range(10) for j in range(i + 1, 10)]
        for i, j in pairs[:20]:
            statements.append(
                PreferenceStatement(i, j) if truth[i] > truth[j] else PreferenceStatement(j, i)
            )
        Q = PreferenceSet(tuple(statements))
        cfg = OptimizerConfig(max_iters=300, grad_samples=2000, rng_seed=1)
        fit = fit_posterior(Q, np.ones(2), table, cfg, estimator="rt")
        theta = fit.theta.params
        assert theta[0] / theta.sum() > 0.5

    def test_deterministic_given_seed(self):
        table, Q, _ = gamma2_instance(4, seed=2, n_statements=3)
        cfg = OptimizerConfig(max_iters=50, grad_samples=200, rng_seed=42)
        a = fit_posterior(Q, np.ones(2), table, cfg)
        b = fit_posterior(Q, np.ones(2), table, cfg)
        assert np.array_equal(a.theta.params, b.theta.params)
        assert a.elbo_trace == b.elbo_trace

    def test_unknown_estimator(self, small_table):
        with pytest.raises(ValueError):
            fit_posterior(PreferenceSet(), np.ones(2), small_table,
                          OptimizerConfig(max_iters=1, grad_samples=1), estimator="sgd")

    def test_trace_length_and_export(self, small_table):
        cfg = OptimizerConfig(max_iters=30, grad_samples=100, rng_seed=5)
        fit = fit_posterior(PreferenceSet(), np.ones(2), small_table, cfg)
        assert len(fit.elbo_trace) == 30
        blob = export_posterior(fit, np.ones(2))
        parsed = json.loads(json.dumps(blob))
        assert parsed["theta"] == fit.theta.params.tolist()
        assert parsed["config"]["estimator"] == "rt"
        assert parsed["seed"] == 5


class TestSamplePosterior:
    def test_uniform_mean(self):
        s = sample_posterior(np.array([1.0, 1.0]), 100_000, np.random.default_rng(0))
        assert np.abs(s.samples.mean(axis=0) - 0.5).max() < 0.005

    def test_dirichlet_moments(self):
        s = sample_posterior(np.array([4.0, 2.0, 2.0]), 100_000, np.random.default_rng(1))
        assert np.abs(s.samples.mean(axis=0) - [0.5, 0.25, 0.25]).max() < 0.01

    def test_concentrated_variance(self):
        theta = np.array([1000.0, 1000.0])
        s = sample_posterior(theta, 50_000, np.random.default_rng(2))
        t0 = theta.sum()
        expected = theta * (t0 - theta) / (t0**2 * (t0 + 1))
        emp = s.samples.var(axis=0)
        assert np.abs(emp / expected - 1.0).max() < 0.2

    def test_rows_on_simplex(self):
        s = sample_posterior(np.array([0.3, 2.0, 1.1]), 1000, np.random.default_rng(3))
        assert np.allclose(s.samples.sum(axis=1), 1.0)
        assert (s.samples >= 0).all()


class TestPosteriorPredictive:
    def test_dominance(self):
        table = PerformanceTable(
            ("a", "b"), (Criterion("g1", 0, 1), Criterion("g2", 0, 1)),
            np.array([[0.9, 0.8], [0.1, 0.2]]),
        )
        p = posterior_predictive(np.ones(4), table, 0, 1, 2000, np.random.default_rng(0))
        assert p == 1.0

    def test_identical_rows_tie(self):
        table = PerformanceTable(
            ("a", "b"), (Criterion("g", 0, 1),), np.array([[0.5], [0.5]])
        )
        p = posterior_predictive(np.ones(2), table, 0, 1, 2000, np.random.default_rng(0))
        assert p == 0.5

    def test_complementarity(self, small_table):
        rng = np.random.default_rng(4)
        p = posterior_predictive(np.array([1.3, 0.8]), small_table, 0, 1, 5001, rng)
        rng = np.random.default_rng(4)
        q = posterior_predictive(np.array([1.3, 0.8]), small_table, 1, 0, 5001, rng)
        assert p + q == pytest.approx(1.0)

    def test_same_alternative_rejected(self, small_table):
        with pytest.raises(ValueError):
            posterior_predictive(np.ones(2), small_table, 1, 1, 10, np.random.default_rng(0))

    def test_matches_quadrature_at_uniform(self):
        table = gamma2_table(3, seed=9)
        u, w = simplex1_grid(2001)
        P = quad_win_matrix(u @ characteristic_matrix(table).T, w)
        rng = np.random.default_rng(5)
        for i in range(3):
            for j in range(i + 1, 3):
                p = posterior_predictive(np.ones(2), table, i, j, 50_000, rng)
                assert p == pytest.approx(P[i, j], abs=0.03)


class TestPosteriorVariance:
    def test_uniform_value(self):
        assert posterior_variance(np.array([1.0, 1.0])) == pytest.approx(1.0 / 6.0)

    def test_concentration(self):
        assert posterior_variance(np.full(3, 1e6)) < 1e-6

    def test_permutation_invariance(self):
        theta = np.array([0.4, 2.0, 1.3])
        assert posterior_variance(theta) == pytest.approx(posterior_variance(theta[::-1]))


class TestInferenceContext:
    def test_fit_cache_returns_same_object(self):
        table, Q, _ = gamma2_instance(4, seed=1, n_statements=3)
        ctx = InferenceContext(table, base_seed=7)
        a = ctx.fit(Q, budget="rollout")
        b = ctx.fit(Q, budget="rollout")
        assert a is b

    def test_independent_contexts_agree(self):
        table, Q, _ = gamma2_instance(4, seed=1, n_statements=3)
        a = InferenceContext(table, base_seed=7).fit(Q, budget="rollout")
        b = InferenceContext(table, base_seed=7).fit(Q, budget="rollout")
        assert np.array_equal(a.theta.params, b.theta.params)

    def test_statement_order_shares_cache(self):
        table, _, _ = gamma2_instance(4, seed=1, n_statements=0)
        s1, s2 = PreferenceStatement(0, 1), PreferenceStatement(2, 3)
        ctx = InferenceContext(table, base_seed=0)
        a = ctx.fit(PreferenceSet((s1, s2)), budget="rollout")
        b = ctx.fit(PreferenceSet((s2, s1)), budget="rollout")
        assert a is b

    def test_pwi_matrix_properties(self):
        table, Q, _ = gamma2_instance(5, seed=4, n_statements=4)
        ctx = InferenceContext(table, base_seed=3)
        pwi = ctx.pwi(Q, 500)
        assert pwi.shape == (5, 5)
        off = ~np.eye(5, dtype=bool)
        assert np.allclose((pwi + pwi.T)[off], 1.0)
        assert ctx.pwi(Q, 500) is pwi
