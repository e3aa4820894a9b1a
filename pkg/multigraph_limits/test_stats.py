"""
Tests for the special functions and goodness-of-fit statistics
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy import stats as scipy_stats

from multigraph_limits.errors import DegenerateBinningError, DomainError
from multigraph_limits.stats import (
    chi_square_gof,
    chi_square_poisson_gof,
    chi_square_sf,
    gamma_cdf,
    gamma_joint_moment,
    gamma_moment,
    gamma_pdf,
    gamma_quantile,
    ks_distance,
    ln_gamma,
    poisson_pmf,
    poisson_tail,
    poisson_truncation_point,
    regularized_lower_gamma,
    regularized_upper_gamma,
    truncated_mean,
)


class TestGammaFunctions:
    @given(st.floats(min_value=0.01, max_value=150.0))
    @settings(max_examples=100, deadline=None)
    def test_ln_gamma_recurrence(self, x):
        assert ln_gamma(x + 1.0) == pytest.approx(ln_gamma(x) + math.log(x), abs=1e-12, rel=1e-14)

    @pytest.mark.parametrize("a", [0.5, 1.0, 1.5, 3.0, 10.0, 40.0])
    @pytest.mark.parametrize("x", [1e-3, 0.3, 1.0, 2.5, 8.0, 30.0, 80.0])
    def test_incomplete_gamma_against_quadrature(self, a, x):
        integral, _ = integrate.quad(
            lambda t: math.exp((a - 1.0) * math.log(t) - t - math.lgamma(a)), 0.0, x, epsabs=1e-14, epsrel=1e-13, limit=200
        )
        assert regularized_lower_gamma(a, x) == pytest.approx(integral, abs=1e-10)
        assert regularized_upper_gamma(a, x) == pytest.approx(1.0 - integral, abs=1e-10)

    def test_incomplete_gamma_matches_scipy_vectorised(self):
        a = np.array([0.3, 1.0, 2.0, 7.5, 25.0])
        x = np.array([0.1, 1.0, 5.0, 7.0, 30.0])
        np.testing.assert_allclose(regularized_lower_gamma(a, x), scipy_stats.gamma.cdf(x, a), atol=1e-12)

    def test_gamma_pdf_integrates_to_one(self):
        total, _ = integrate.quad(lambda x: gamma_pdf(x, 1.5, 0.75), 0.0, 200.0, epsabs=1e-13, limit=200)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_gamma_cdf_against_simpson(self):
        grid = np.linspace(0.0, 3.0, 20001)
        density = gamma_pdf(grid, 3.0, 1.2)
        assert gamma_cdf(3.0, 3.0, 1.2) == pytest.approx(integrate.simpson(density, x=grid), abs=1e-10)

    def test_exponential_quantile(self):
        assert gamma_quantile(0.75, 1.0, 1.0) == pytest.approx(2.0 * math.log(2.0), abs=1e-12)

    @given(
        st.floats(min_value=1e-6, max_value=1.0 - 1e-6),
        st.floats(min_value=0.2, max_value=20.0),
        st.floats(min_value=0.1, max_value=5.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_quantile_round_trip(self, u, alpha, beta):
        assert gamma_cdf(gamma_quantile(u, alpha, beta), alpha, beta) == pytest.approx(u, abs=1e-10)

    def test_quantile_vectorised(self):
        levels = np.array([0.1, 0.5, 0.9])
        np.testing.assert_allclose(gamma_quantile(levels, 1.5, 0.75), scipy_stats.gamma.ppf(levels, 1.5, scale=1 / 0.75), rtol=1e-9)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1])
    def test_quantile_domain(self, u):
        with pytest.raises(DomainError):
            gamma_quantile(u, 1.0, 1.0)

    def test_bad_parameters(self):
        with pytest.raises(DomainError):
            gamma_cdf(1.0, 0.0, 1.0)


class TestPoisson:
    def test_pmf_value(self):
        assert poisson_pmf(2, 1.0) == pytest.approx(math.exp(-1.0) / 2.0, rel=1e-14)

    def test_pmf_at_zero_mean(self):
        assert poisson_pmf(0, 0.0) == 1.0
        assert poisson_pmf(3, 0.0) == 0.0

    def test_pmf_domain(self):
        with pytest.raises(DomainError):
            poisson_pmf(-1, 1.0)
        with pytest.raises(DomainError):
            poisson_pmf(1, -1.0)

    @pytest.mark.parametrize("lam", [0.5, 4.0, 60.0])
    def test_tail_closes_the_sum(self, lam):
        kmax = 3 * int(lam) + 5
        head = float(np.sum(poisson_pmf(np.arange(kmax + 1), lam)))
        assert head + poisson_tail(kmax, lam) == pytest.approx(1.0, abs=1e-13)

    @pytest.mark.parametrize("lam", [0.0, 0.2, 3.0, 250.0])
    def test_truncation_point_is_minimal(self, lam):
        point = poisson_truncation_point(lam, 1e-12)
        assert poisson_tail(point, lam) < 1e-12
        if point > 0:
            assert poisson_tail(point - 1, lam) >= 1e-12


class TestMoments:
    def test_first_moment_is_rho(self):
        assert gamma_moment(1.5, 2.0, 1) == pytest.approx(2.0)

    def test_second_moment(self):
        assert gamma_moment(1.5, 2.0, 2) == pytest.approx(4.0 * 2.5 / 1.5)

    def test_matches_scipy(self):
        assert gamma_moment(0.7, 3.0, 3) == pytest.approx(scipy_stats.gamma.moment(3, 0.7, scale=3.0 / 0.7), rel=1e-12)

    def test_joint_moment_factorises(self):
        assert gamma_joint_moment(1.5, 2.0, [1, 2]) == pytest.approx(gamma_moment(1.5, 2.0, 1) * gamma_moment(1.5, 2.0, 2))


class TestGoodnessOfFit:
    def test_ks_on_quantile_sample(self):
        size = 500
        sample = scipy_stats.expon.ppf((np.arange(1, size + 1) - 0.5) / size)
        assert ks_distance(sample, scipy_stats.expon.cdf) <= 0.5 / size + 1e-12

    def test_ks_constant_sample(self):
        cdf = scipy_stats.norm.cdf
        assert ks_distance(np.full(10, 0.3), cdf) == pytest.approx(max(cdf(0.3), 1 - cdf(0.3)))

    def test_ks_matches_scipy(self):
        sample = np.random.default_rng(3).gamma(1.5, 2.0, size=400)
        expected = scipy_stats.kstest(sample, "gamma", args=(1.5, 0, 2.0)).statistic
        assert ks_distance(sample, lambda z: gamma_cdf(z, 1.5, 0.5)) == pytest.approx(expected, abs=1e-10)

    def test_chi_square_sf_matches_scipy(self):
        assert chi_square_sf(12.3, 7) == pytest.approx(scipy_stats.chi2.sf(12.3, 7), rel=1e-10)

    def test_gof_merges_sparse_cells(self):
        report = chi_square_gof([50, 30, 15, 3, 2], [0.5, 0.3, 0.15, 0.03, 0.02])
        assert report.statistic == pytest.approx(0.0)
        assert report.bins[-1] == (3, 4)
        assert report.dof == 3

    def test_single_bin(self):
        with pytest.raises(DegenerateBinningError):
            chi_square_gof([3, 1], [0.5, 0.5])

    def test_poisson_self_test_passes(self):
        passes = 0
        for seed in range(20):
            draws = np.random.default_rng(seed).poisson(3.0, size=100_000)
            passes += chi_square_poisson_gof(np.bincount(draws), 3.0).p_value > 1e-3
        assert passes >= 18

    def test_poisson_gof_has_power(self):
        draws = np.random.default_rng(1).poisson(6.0, size=100_000)
        assert chi_square_poisson_gof(np.bincount(draws), 3.0).p_value < 1e-6

    def test_poisson_gof_open_tail(self):
        draws = np.random.default_rng(2).poisson(2.0, size=1000)
        report = chi_square_poisson_gof(np.bincount(draws), 2.0)
        assert report.bins[-1][1] is None
        assert report.sample_size == 1000


class TestTruncatedMean:
    def test_zero_threshold_is_plain_mean(self):
        assert truncated_mean([1, 2, 3], 0) == pytest.approx(2.0)

    def test_threshold_above_sample(self):
        assert truncated_mean([1, 2, 3], 10) == 0.0

    def test_example(self):
        assert truncated_mean([1, 3], 2) == pytest.approx(1.5)

    def test_negative_sample(self):
        with pytest.raises(DomainError):
            truncated_mean([-1, 2], 0)
