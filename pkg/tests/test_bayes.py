import math

import numpy as np
import pytest

from censorfit.core.bayes import (
    DerivedStats,
    ImportanceDraws,
    Priors,
    bayes_estimate,
    draw_importance_restricted,
    draw_importance_unrestricted,
    draw_lambda1_restricted,
    draw_lambdas_unrestricted,
    hpd_cri,
    monte_carlo_se,
    posterior_summary,
    prestimate_alpha,
    regression_shape_estimate,
    symmetric_cri,
)
from censorfit.core.likelihood import fit_restricted, log_power_sum
from censorfit.core.sampling import POSTERIOR_SLOT, seed_stream, stream_id
from censorfit.errors import (
    DegenerateSampleError,
    ParameterDomainError,
    PropagationError,
    ResolutionError,
    SampleValidationError,
    UsageError,
)


def fixed_draws(weights, h=None) -> ImportanceDraws:
    """Hand-built draws; alpha carries the functional values."""
    weights = np.asarray(weights, dtype=float)
    M = len(weights)
    h = np.arange(1.0, M + 1) if h is None else np.asarray(h, dtype=float)
    return ImportanceDraws(
        model="restricted",
        alpha=h,
        lambda1=np.ones(M),
        lambda2=np.full(M, 0.5),
        beta=np.full(M, 0.5),
        log_weights=np.log(weights, out=np.full(M, -np.inf), where=weights > 0),
        weights=weights,
        alpha_tilde=1.0,
        proposal_rate=2.0,
    )


def brute_force_hpd(h, w, gamma, tol=1e-10):
    order = np.argsort(h, kind="stable")
    h, w = h[order], w[order]
    M = len(h)
    best = None
    for j1 in range(M):
        if w[j1] > 1 - gamma + tol:
            candidate = (0.0, j1, j1)
        else:
            total, j2 = 0.0, j1 - 1
            while j2 + 1 < M and total + w[j2 + 1] <= 1 - gamma + tol:
                total += w[j2 + 1]
                j2 += 1
            if j2 < j1 or j2 >= M - 1:
                continue
            candidate = (h[j2] - h[j1], j1, j2)
        if best is None or candidate[0] < best[0]:
            best = candidate
    return h[best[1]], h[best[2]]


@pytest.fixture
def rng():
    return seed_stream(3, stream_id(0, POSTERIOR_SLOT))


class TestRegressionPrestimate:
    def test_two_point_slope(self):
        # y = ln(-ln(0.75)), ln(-ln(0.25)) against ln t = 0, 1
        expected = math.log(-math.log(0.25)) - math.log(-math.log(0.75))
        assert regression_shape_estimate([1.0, math.e]) == pytest.approx(expected)
        assert regression_shape_estimate([math.e, 1.0]) == pytest.approx(1.5725, abs=1e-4)

    def test_exact_on_quantile_curve(self):
        l, nu = 10, 2.0
        p = (np.arange(1, l + 1) - 0.5) / l
        times = (-np.log1p(-p)) ** (1.0 / nu)
        assert regression_shape_estimate(times) == pytest.approx(nu, rel=1e-10)

    def test_errors(self):
        with pytest.raises(SampleValidationError):
            regression_shape_estimate([1.0])
        with pytest.raises(SampleValidationError):
            regression_shape_estimate([0.0, 1.0])
        with pytest.raises(DegenerateSampleError):
            regression_shape_estimate([2.0, 2.0, 2.0])

    def test_prestimate_averages_causes(self, sample):
        expected = np.mean([regression_shape_estimate(sample.cause_times(k)) for k in (1, 2)])
        assert prestimate_alpha(sample) == pytest.approx(expected)

    def test_prestimate_fallback(self, make_sample):
        assert prestimate_alpha(make_sample([1.0, 2.0], [1, 2])) == 1.0

    def test_prestimate_skips_small_cause(self, make_sample):
        sample = make_sample([0.5, 1.0, 2.0], [1, 2, 1])
        assert prestimate_alpha(sample) == pytest.approx(regression_shape_estimate([0.5, 2.0]))


class TestConditionalDraws:
    N = 20_000

    def test_lambda1_restricted(self, sample, rng):
        priors = Priors()
        derived = DerivedStats(sample, priors)
        alpha, beta = 1.5, 0.5
        draws = draw_lambda1_restricted(rng, derived, np.full(self.N, alpha), np.full(self.N, beta))
        shape = sample.m + priors.a1
        rate = priors.b1 + (1.0 + beta) * math.exp(log_power_sum(sample, alpha))
        sd = math.sqrt(shape) / rate
        assert abs(np.mean(draws) - shape / rate) < 4.0 * sd / math.sqrt(self.N)

    def test_lambdas_unrestricted(self, sample, rng):
        priors = Priors()
        derived = DerivedStats(sample, priors)
        alpha = 1.2
        lambda1, lambda2 = draw_lambdas_unrestricted(rng, derived, np.full(self.N, alpha))
        g = math.exp(log_power_sum(sample, alpha))
        for draws, count, a, b in ((lambda1, sample.m1, priors.a4, priors.b4), (lambda2, sample.m2, priors.a5, priors.b5)):
            shape, rate = count + a, b + g
            sd = math.sqrt(shape) / rate
            assert abs(np.mean(draws) - shape / rate) < 4.0 * sd / math.sqrt(self.N)


class TestImportanceSampling:
    def test_restricted_draws(self, sample, rng):
        draws = draw_importance_restricted(sample, Priors(), 500, rng)
        assert draws.M == 500
        assert draws.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(draws.weights >= 0)
        assert np.all((draws.beta > 0) & (draws.beta < 1))
        np.testing.assert_allclose(draws.lambda2, draws.beta * draws.lambda1)
        assert 1.0 <= draws.ess <= 500.0

    def test_unrestricted_draws(self, sample, rng):
        draws = draw_importance_unrestricted(sample, Priors(), 500, rng)
        assert draws.beta is None
        assert draws.weights.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(draws.values("beta"), draws.lambda2 / draws.lambda1)

    def test_deterministic(self, sample):
        a = draw_importance_restricted(sample, Priors(), 200, seed_stream(8, 1))
        b = draw_importance_restricted(sample, Priors(), 200, seed_stream(8, 1))
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.lambda1, b.lambda1)

    def test_posterior_mean_near_mle(self, example_sample, rng):
        fit = fit_restricted(example_sample)
        draws = draw_importance_restricted(example_sample, Priors(), 4000, rng)
        assert bayes_estimate(draws, "alpha") == pytest.approx(fit.alpha, rel=0.2)

    def test_posterior_gamma_proposal(self, sample, rng):
        small = sample.scaled(0.1)
        draws = draw_importance_restricted(small, Priors(), 300, rng, proposal="posterior-gamma")
        assert draws.proposal == "posterior-gamma"
        assert draws.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert draws.proposal_rate == pytest.approx(DerivedStats(small, Priors()).A2)

    def test_posterior_gamma_needs_positive_rate(self, sample, rng):
        with pytest.raises(UsageError):
            draw_importance_restricted(sample.scaled(100.0), Priors(), 100, rng, proposal="posterior-gamma")

    def test_unknown_proposal_and_small_M(self, sample, rng):
        with pytest.raises(UsageError):
            draw_importance_restricted(sample, Priors(), 100, rng, proposal="uniform")
        with pytest.raises(UsageError):
            draw_importance_unrestricted(sample, Priors(), 1, rng)

    @pytest.mark.parametrize("c", [1e-3, 1e3])
    def test_rescaled_data_keeps_finite_weights(self, sample, rng, c):
        for draws in (
            draw_importance_restricted(sample.scaled(c), Priors(), 300, rng),
            draw_importance_unrestricted(sample.scaled(c), Priors(), 300, rng),
        ):
            assert np.all(np.isfinite(draws.weights))
            assert draws.weights.sum() == pytest.approx(1.0, abs=1e-12)
            assert math.isfinite(bayes_estimate(draws, "lambda1"))

    def test_priors_validated(self):
        with pytest.raises(ParameterDomainError):
            Priors(a1=-1.0)
        assert Priors.from_defaults(b3=2.0).b3 == 2.0


class TestEstimates:
    def test_constant_functional(self, sample, rng):
        draws = draw_importance_unrestricted(sample, Priors(), 200, rng)
        assert bayes_estimate(draws, np.ones(draws.M)) == pytest.approx(1.0, abs=1e-12)
        assert bayes_estimate(draws, lambda d: np.full(d.M, 2.0)) == pytest.approx(2.0)
        assert monte_carlo_se(draws, np.ones(draws.M)) == pytest.approx(0.0, abs=1e-12)

    def test_equal_weights_give_mean(self):
        draws = fixed_draws(np.full(4, 0.25))
        assert bayes_estimate(draws, "alpha") == pytest.approx(2.5)
        assert draws.ess == pytest.approx(4.0)

    def test_non_finite_functional(self):
        draws = fixed_draws(np.full(4, 0.25))
        with pytest.raises(PropagationError):
            bayes_estimate(draws, np.array([1.0, np.nan, 2.0, 3.0]))

    def test_non_finite_at_zero_weight_is_ignored(self):
        draws = fixed_draws(np.array([0.5, 0.0, 0.5]))
        assert bayes_estimate(draws, np.array([1.0, np.inf, 3.0])) == pytest.approx(2.0)

    def test_unknown_quantity(self):
        with pytest.raises(UsageError):
            bayes_estimate(fixed_draws(np.full(2, 0.5)), "gamma")


class TestCredibleIntervals:
    def test_symmetric_equal_weights(self):
        draws = fixed_draws(np.full(100, 0.01))
        interval = symmetric_cri(draws, "alpha", 0.05)
        assert (interval.lower, interval.upper) == (3.0, 97.0)
        assert interval.method == "symmetric"

    def test_symmetric_sorts_values(self):
        h = np.random.default_rng(1).permutation(np.arange(1.0, 101.0))
        interval = symmetric_cri(fixed_draws(np.full(100, 0.01), h), "alpha", 0.05)
        assert (interval.lower, interval.upper) == (3.0, 97.0)

    def test_point_mass(self):
        draws = fixed_draws([0.01, 0.97, 0.01, 0.01])
        interval = symmetric_cri(draws, "alpha", 0.05)
        assert (interval.lower, interval.upper) == (2.0, 2.0)
        assert hpd_cri(draws, "alpha", 0.05).length == 0.0

    def test_hpd_small_example(self):
        draws = fixed_draws([0.1, 0.2, 0.4, 0.2, 0.1])
        interval = hpd_cri(draws, "alpha", 0.05)
        assert (interval.lower, interval.upper) == (1.0, 4.0)
        assert interval.method == "hpd"

    def test_hpd_prefers_dense_region(self):
        h = np.concatenate([np.linspace(0.0, 1.0, 90), np.linspace(50.0, 100.0, 10)])
        draws = fixed_draws(np.full(100, 0.01), h)
        hpd = hpd_cri(draws, "alpha", 0.2)
        symmetric = symmetric_cri(draws, "alpha", 0.2)
        assert hpd.upper <= 1.0
        assert hpd.length <= symmetric.length

    def test_hpd_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            weights = rng.dirichlet(np.ones(60))
            h = rng.normal(size=60)
            interval = hpd_cri(fixed_draws(weights, h), "alpha", 0.1)
            assert (interval.lower, interval.upper) == brute_force_hpd(h, weights, 0.1)

    def test_zero_weight_draws_never_bound_intervals(self):
        draws = fixed_draws(np.array([0.0, 0.3, 0.2, 0.2, 0.3]), [np.nan, -2.0, -1.0, 1.0, 2.0])
        symmetric = symmetric_cri(draws, "alpha", 0.5)
        hpd = hpd_cri(draws, "alpha", 0.5)
        assert (symmetric.lower, symmetric.upper) == (-2.0, -1.0)
        assert (hpd.lower, hpd.upper) == (-2.0, -1.0)

    def test_level_too_fine_for_draws(self):
        with pytest.raises(ResolutionError):
            symmetric_cri(fixed_draws(np.full(100, 0.01)), "alpha", 1e-12)

    def test_gamma_range(self):
        with pytest.raises(UsageError):
            hpd_cri(fixed_draws(np.full(4, 0.25)), "alpha", 1.0)


class TestPosteriorSummary:
    def test_restricted_summary(self, sample, rng):
        draws = draw_importance_restricted(sample, Priors(), 400, rng)
        summary = posterior_summary(draws, 0.05)
        assert set(summary["estimates"]) == {"alpha", "lambda1", "lambda2", "beta"}
        for name, cri in summary["cri"].items():
            assert cri["hpd"]["upper"] - cri["hpd"]["lower"] <= cri["symmetric"]["upper"] - cri["symmetric"]["lower"] + 1e-12
            assert summary["mc_se"][name] >= 0

    def test_unrestricted_summary(self, sample, rng):
        draws = draw_importance_unrestricted(sample, Priors(), 400, rng)
        summary = posterior_summary(draws)
        assert list(summary["estimates"]) == ["alpha", "lambda1", "lambda2"]
        assert summary["model"] == "unrestricted"
        assert summary["M"] == 400
