import math

import numpy as np
import pytest
from scipy import stats

from censorfit.core.censoring import CensoringPlan, CompetingRisksSample, generate_sample
from censorfit.core.likelihood import (
    FitOptions,
    NullParams,
    RestrictedParams,
    UnrestrictedParams,
    fit_null_equal_scales,
    fit_restricted,
    fit_unrestricted,
    fixed_point_map_h,
    log_power_sum,
    loglik_null,
    loglik_restricted,
    loglik_unrestricted,
    lrt_decision,
    lrt_equal_scales,
    maximize_profile,
    profile_p1,
    profile_p1_derivatives,
    profile_p2,
    profile_series,
    weighted_power_sums,
)
from censorfit.core.sampling import seed_stream, stream_id
from censorfit.errors import DegenerateSampleError, ParameterDomainError, UsageError

E = math.e


@pytest.fixture
def two_point(make_sample):
    """Complete sample x = (1, e), one failure per cause."""
    return make_sample([1.0, E], [1, 2])


def relabel(sample: CompetingRisksSample, causes) -> CompetingRisksSample:
    return CompetingRisksSample(sample.times, causes, sample.r_star, sample.j_change, sample.plan)


def simulated_datasets(count: int, seed: int = 2024):
    """Samples cycling over schemes, durations and generating parameters."""
    schemes = ("right:10", "fsp:10", "osp:10")
    durations = (0.25, 0.75, math.inf)
    truths = ((0.5, 1.2, 1.0), (1.5, 1.4, 1.0), (1.5, 1.0, 1.0), (2.0, 0.8, 1.2))
    for r in range(count):
        plan = CensoringPlan.from_scheme(50, 40, schemes[r % 3], durations[(r // 3) % 3])
        alpha, lambda1, lambda2 = truths[(r // 9) % 4]
        yield generate_sample(plan, alpha, lambda1, lambda2, seed_stream(seed, stream_id(r)))


def check_coincidence(sample: CompetingRisksSample):
    restricted = fit_restricted(sample)
    unrestricted = fit_unrestricted(sample)
    assert restricted.alpha == pytest.approx(unrestricted.alpha, rel=1e-8)
    assert restricted.lambda1 == pytest.approx(unrestricted.lambda1, rel=1e-8)
    assert restricted.lambda2 == pytest.approx(unrestricted.lambda2, rel=1e-8)
    assert restricted.max_loglik == pytest.approx(unrestricted.max_loglik, abs=1e-9)


def check_solvers_and_concavity(sample: CompetingRisksSample):
    fixed_point = fit_unrestricted(sample, FitOptions(method="fixed-point")).alpha
    bounded = fit_unrestricted(sample, FitOptions(method="bounded")).alpha
    assert fixed_point == pytest.approx(bounded, rel=1e-6)
    for a in np.linspace(0.2 * fixed_point, 3.0 * fixed_point, 15):
        step = 1e-3 * a
        second = profile_p1(a - step, sample) - 2.0 * profile_p1(a, sample) + profile_p1(a + step, sample)
        assert second < 0
        assert profile_p1_derivatives(a, sample)[1] < 0


class TestPowerSums:
    def test_two_point_values(self, two_point):
        g, g1, g2 = weighted_power_sums(two_point, 2.0)
        assert g == pytest.approx(1.0 + E**2)
        assert g1 == pytest.approx(E**2)
        assert g2 == pytest.approx(E**2)

    def test_removals_weight_terms(self, make_sample):
        sample = make_sample([1.0, 2.0], [1, 2], removals=(1, 2))
        g, _, _ = weighted_power_sums(sample, 1.0)
        assert g == pytest.approx(2 * 1.0 + 3 * 2.0)

    def test_vectorized(self, sample):
        alphas = np.array([0.5, 1.0, 3.0])
        np.testing.assert_allclose(log_power_sum(sample, alphas), [log_power_sum(sample, a) for a in alphas])

    def test_no_overflow_for_large_alpha(self, make_sample):
        sample = make_sample([10.0, 1000.0], [1, 2])
        value = log_power_sum(sample, 500.0)
        assert math.isfinite(value)
        assert value == pytest.approx(500.0 * math.log(1000.0))


class TestLogLikelihood:
    def test_two_point_restricted(self, two_point):
        # m ln(alpha lambda1) + m2 ln beta + (alpha-1) sum ln x - lambda1 (1+beta) g
        assert loglik_restricted(RestrictedParams(1.0, 1.0, 1.0), two_point) == pytest.approx(-2.0 * (1.0 + E))

    def test_two_point_unrestricted(self, two_point):
        value = loglik_unrestricted(UnrestrictedParams(2.0, 0.5, 0.25), two_point)
        g = 1.0 + E**2
        expected = 2 * math.log(2.0) + math.log(0.5) + math.log(0.25) + 1.0 - 0.75 * g
        assert value == pytest.approx(expected)

    def test_models_agree_on_shared_points(self, sample):
        restricted = loglik_restricted(RestrictedParams(1.3, 0.9, 0.6), sample)
        unrestricted = loglik_unrestricted(UnrestrictedParams(1.3, 0.9, 0.54), sample)
        assert restricted == pytest.approx(unrestricted)
        assert loglik_null(NullParams(1.3, 0.8), sample) == pytest.approx(
            loglik_unrestricted(UnrestrictedParams(1.3, 0.8, 0.8), sample)
        )

    def test_parameter_domains(self):
        with pytest.raises(ParameterDomainError):
            RestrictedParams(1.0, 1.0, 1.5)
        with pytest.raises(ParameterDomainError):
            UnrestrictedParams(0.0, 1.0, 1.0)
        with pytest.raises(ParameterDomainError):
            NullParams(1.0, 0.0)

    def test_profile_p2_maximized_at_ratio(self):
        m, m2 = 30, 10
        beta_hat = m2 / (m - m2)
        grid = np.linspace(0.05, 1.0, 200)
        assert all(profile_p2(beta_hat, m, m2) >= profile_p2(b, m, m2) - 1e-12 for b in grid)


class TestFixedPointMap:
    def test_two_point_value(self, two_point):
        expected = 1.0 / (E / (1.0 + E) - 0.5)
        assert fixed_point_map_h(1.0, two_point) == pytest.approx(expected, rel=1e-12)
        assert fixed_point_map_h(1.0, two_point) == pytest.approx(4.3279, abs=1e-3)

    def test_fixed_point_is_profile_maximizer(self, sample):
        alpha, _, converged, _, _ = maximize_profile(sample)
        assert converged
        assert fixed_point_map_h(alpha, sample) == pytest.approx(alpha, rel=1e-7)
        first, second = profile_p1_derivatives(alpha, sample)
        assert abs(first) < 1e-6 * sample.m
        assert second < 0

    def test_derivative_matches_finite_difference(self, sample):
        a, step = 1.3, 1e-5
        numeric = (profile_p1(a + step, sample) - profile_p1(a - step, sample)) / (2 * step)
        assert profile_p1_derivatives(a, sample)[0] == pytest.approx(numeric, rel=1e-5, abs=1e-5)


class TestSolvers:
    @pytest.mark.parametrize("method", ["fixed-point", "newton", "bounded"])
    def test_methods_agree(self, sample, method):
        reference = fit_unrestricted(sample, FitOptions(method="fixed-point"))
        result = fit_unrestricted(sample, FitOptions(method=method))
        assert result.converged
        assert result.alpha == pytest.approx(reference.alpha, rel=1e-6)
        assert result.max_loglik == pytest.approx(reference.max_loglik, abs=1e-8)

    def test_maximizer_beats_grid(self, sample):
        alpha_hat = fit_restricted(sample).alpha
        best = max(p for _, p in profile_series(sample, 0.1, 10.0, 400))
        assert profile_p1(alpha_hat, sample) >= best - 1e-9

    def test_start_value_does_not_matter(self, sample):
        a = fit_unrestricted(sample, FitOptions(alpha0=0.3)).alpha
        b = fit_unrestricted(sample, FitOptions(alpha0=5.0)).alpha
        assert a == pytest.approx(b, rel=1e-6)

    def test_single_failure_is_degenerate(self, make_sample):
        with pytest.raises(DegenerateSampleError):
            fit_restricted(make_sample([1.0], [1]))

    def test_equal_times_are_degenerate(self, make_sample):
        with pytest.raises(DegenerateSampleError):
            fit_unrestricted(make_sample([2.0, 2.0, 2.0], [1, 2, 1]))

    def test_bad_options(self):
        with pytest.raises(UsageError):
            FitOptions(method="secant")
        with pytest.raises(UsageError):
            FitOptions(eps=0.0)
        with pytest.raises(UsageError):
            FitOptions(alpha0=-1.0)

    def test_from_defaults_ignores_none(self):
        opts = FitOptions.from_defaults(method=None, eps=1e-6)
        assert opts.method == "fixed-point"
        assert opts.eps == 1e-6

    def test_profile_series_grid(self, sample):
        series = profile_series(sample, 0.5, 2.0, 5)
        assert len(series) == 5
        assert series[0][0] == pytest.approx(0.5) and series[-1][0] == pytest.approx(2.0)
        with pytest.raises(UsageError):
            profile_series(sample, 2.0, 1.0, 5)


class TestClosedForms:
    def test_restricted_matches_unrestricted_when_cause1_dominates(self, dominant_sample):
        restricted = fit_restricted(dominant_sample)
        unrestricted = fit_unrestricted(dominant_sample)
        assert restricted.alpha == pytest.approx(unrestricted.alpha, rel=1e-10)
        assert restricted.lambda1 == pytest.approx(unrestricted.lambda1, rel=1e-8)
        assert restricted.lambda2 == pytest.approx(unrestricted.lambda2, rel=1e-8)
        assert restricted.max_loglik == pytest.approx(unrestricted.max_loglik, abs=1e-8)
        assert restricted.params.beta == pytest.approx(dominant_sample.m2 / dominant_sample.m1)

    def test_restricted_clips_beta_when_cause2_dominates(self, sample):
        swapped = relabel(sample, np.where(sample.causes == 1, 2, 1))
        if swapped.m1 > swapped.m2:
            swapped = sample
        result = fit_restricted(swapped)
        assert result.params.beta == 1.0
        assert result.lambda1 == pytest.approx(result.lambda2)

    def test_no_cause2_failures_is_boundary(self, make_sample):
        sample = make_sample([0.5, 1.0, 2.0, 3.0], [1, 1, 1, 1])
        restricted = fit_restricted(sample)
        assert restricted.boundary and restricted.params.beta == 0.0
        unrestricted = fit_unrestricted(sample)
        assert unrestricted.boundary and unrestricted.lambda2 == 0.0

    def test_null_rate_is_mean_of_unrestricted(self, sample):
        null = fit_null_equal_scales(sample)
        full = fit_unrestricted(sample)
        assert null.params.lam == pytest.approx((full.lambda1 + full.lambda2) / 2.0, rel=1e-10)

    def test_nesting_of_maxima(self, sample):
        null = fit_null_equal_scales(sample).max_loglik
        restricted = fit_restricted(sample).max_loglik
        unrestricted = fit_unrestricted(sample).max_loglik
        assert unrestricted >= restricted - 1e-9
        assert restricted >= null - 1e-9

    def test_scale_equivariance(self, sample):
        c = 10.0
        original = fit_unrestricted(sample)
        scaled = fit_unrestricted(sample.scaled(c))
        assert scaled.alpha == pytest.approx(original.alpha, rel=1e-6)
        factor = c ** (-original.alpha)
        assert scaled.lambda1 == pytest.approx(original.lambda1 * factor, rel=1e-5)
        assert scaled.lambda2 == pytest.approx(original.lambda2 * factor, rel=1e-5)

    def test_to_dict(self, sample):
        record = fit_restricted(sample).to_dict()
        assert {"alpha", "lambda1", "lambda2", "beta", "loglik", "converged", "iterations", "method", "boundary"} <= set(record)


class TestLikelihoodRatio:
    def test_decision(self):
        result = lrt_decision(7.619, level=0.05)
        assert result.critical == pytest.approx(3.841459, abs=1e-6)
        assert result.reject
        assert result.p_value == pytest.approx(stats.chi2.sf(7.619, 1), rel=1e-9)
        assert not lrt_decision(1.0).reject

    def test_bad_level(self):
        with pytest.raises(UsageError):
            lrt_decision(1.0, level=1.0)

    def test_stored_statistic_is_checked(self):
        result = lrt_decision(-1e-12)
        assert result.statistic == 0.0 and result.p_value == pytest.approx(1.0)
        with pytest.raises(UsageError):
            lrt_decision(-0.5)
        with pytest.raises(UsageError):
            lrt_decision(math.nan)

    def test_balanced_causes_give_zero(self, sample):
        balanced = relabel(sample, np.tile([1, 2], sample.m // 2))
        result = lrt_equal_scales(balanced)
        assert result.statistic == pytest.approx(0.0, abs=1e-8)
        assert not result.reject

    def test_statistic_depends_only_on_cause_counts(self, sample):
        m, m1, m2 = sample.m, sample.m1, sample.m2
        expected = 2.0 * (m1 * math.log(2.0 * m1 / m) + m2 * math.log(2.0 * m2 / m))
        assert lrt_equal_scales(sample).statistic == pytest.approx(expected, rel=1e-7, abs=1e-9)

    def test_to_dict_keys(self, sample):
        assert set(lrt_equal_scales(sample).to_dict()) == {"lambda_stat", "df", "critical", "p_value", "reject", "level"}

    @pytest.mark.slow
    def test_size_under_equal_scales(self):
        # Lambda is a function of m1 ~ Binomial(40, 1/2); rejection iff m1 <= 13 or m1 >= 27
        from censorfit.core.censoring import CensoringPlan

        plan = CensoringPlan(40, 40, (0,) * 40)
        reps = 2000
        rejections = sum(
            lrt_equal_scales(generate_sample(plan, 1.5, 1.0, 1.0, seed_stream(77, stream_id(r)))).reject
            for r in range(reps)
        )
        exact = 2.0 * stats.binom.sf(26, 40, 0.5)
        se = math.sqrt(exact * (1.0 - exact) / reps)
        assert abs(rejections / reps - exact) < 4.0 * se


class TestAcrossSimulatedData:
    def test_coincidence_when_cause1_dominates(self):
        dominant = [s for s in simulated_datasets(40) if s.m1 > s.m2]
        assert dominant
        for sample in dominant:
            check_coincidence(sample)

    def test_solver_agreement_and_concavity(self):
        for sample in simulated_datasets(40):
            check_solvers_and_concavity(sample)

    @pytest.mark.slow
    def test_thousand_datasets(self):
        for sample in simulated_datasets(1000, seed=99):
            if sample.m1 > sample.m2:
                check_coincidence(sample)
            check_solvers_and_concavity(sample)
