"""
Tests des fonctions spéciales et des lois F/t
"""

import numpy as np
import pytest
from scipy import integrate

from robust_ebayes.exceptions import DomainError
from robust_ebayes.numerics import (
    digamma, trigamma, trigamma_inverse,
    f_cdf, f_sf, f_quantile, f_isf, f_pdf, t_tail2,
)


pytestmark = pytest.mark.unit


class TestPolygamma:
    @pytest.mark.parametrize("x, expected", [
        (1.0, -0.5772156649),
        (0.5, -1.9635100260),
        (2.0, 0.4227843351),
    ])
    def test_digamma_values(self, x, expected):
        assert digamma(x) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("x, expected", [
        (1.0, 1.6449340668),
        (0.5, 4.9348022005),
        (2.0, 0.6449340668),
    ])
    def test_trigamma_values(self, x, expected):
        assert trigamma(x) == pytest.approx(expected, rel=1e-10)

    def test_recurrences(self):
        x = np.geomspace(1e-3, 1e5, 40)
        np.testing.assert_allclose(digamma(x + 1), digamma(x) + 1 / x, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(trigamma(x + 1), trigamma(x) - 1 / x ** 2, rtol=1e-9)

    def test_array_in_array_out(self):
        out = digamma(np.array([1.0, 2.0]))
        assert isinstance(out, np.ndarray)
        assert isinstance(digamma(1.0), float)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            digamma(bad)
        with pytest.raises(DomainError):
            trigamma(bad)


class TestTrigammaInverse:
    def test_known_value(self):
        assert trigamma_inverse(1.6449340668) == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.parametrize("x", [0.01, 0.7, 7.3, 150.0, 1e5])
    def test_roundtrip(self, x):
        assert trigamma_inverse(trigamma(x)) == pytest.approx(x, rel=1e-8)

    def test_tiny_value_is_infinite(self):
        assert trigamma_inverse(1e-12) == np.inf

    def test_domain(self):
        with pytest.raises(DomainError):
            trigamma_inverse(0.0)
        with pytest.raises(DomainError):
            trigamma_inverse(-2.0)


class TestFDistribution:
    @pytest.mark.parametrize("d", [0.5, 1.0, 4.0, 37.0])
    def test_median_of_symmetric_law(self, d):
        assert f_cdf(1.0, d, d) == pytest.approx(0.5, abs=1e-12)
        assert f_quantile(0.5, d, d) == pytest.approx(1.0, rel=1e-10)

    def test_cauchy_closed_form(self):
        x = 2.3
        assert f_cdf(x, 1, 1) == pytest.approx(2 / np.pi * np.arctan(np.sqrt(x)), abs=1e-12)

    def test_cdf_against_density_integral(self):
        expected, _ = integrate.quad(lambda u: f_pdf(u, 4, 6), 0, 3.0, epsabs=1e-13)
        assert f_cdf(3.0, 4, 6) == pytest.approx(expected, abs=1e-10)

    def test_reciprocal_symmetry(self):
        x = np.array([0.2, 1.5, 8.0])
        np.testing.assert_allclose(f_cdf(x, 3, 7), f_sf(1 / x, 7, 3), atol=1e-12)

    @pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
    def test_quantile_roundtrip(self, x):
        assert f_quantile(f_cdf(x, 3, 5), 3, 5) == pytest.approx(x, rel=1e-8)

    def test_quantile_by_bisection(self):
        lo, hi = 0.0, 100.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f_cdf(mid, 4, 10) < 0.9:
                lo = mid
            else:
                hi = mid
        assert f_quantile(0.9, 4, 10) == pytest.approx(0.5 * (lo + hi), rel=1e-9)

    def test_isf_small_tail(self):
        q = 1e-14
        x = f_isf(q, 4, 8)
        assert f_sf(x, 4, 8) == pytest.approx(q, rel=1e-6)

    def test_infinite_denominator_is_chi_square(self):
        from scipy import stats
        assert f_cdf(2.0, 3, np.inf) == pytest.approx(stats.chi2.cdf(6.0, 3), abs=1e-12)
        assert f_quantile(0.3, 3, np.inf) == pytest.approx(stats.chi2.ppf(0.3, 3) / 3, rel=1e-10)
        assert f_cdf(2.0, 3, 1e12) == pytest.approx(f_cdf(2.0, 3, np.inf), abs=1e-6)

    def test_density_values(self):
        assert f_pdf(1.0, 2, 2) == pytest.approx(0.25, rel=1e-12)
        assert f_pdf(0.0, 4, 4) == 0.0

    def test_density_integrates_to_one(self):
        total, _ = integrate.quad(lambda u: f_pdf(u, 4, 10), 0, 50, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            f_cdf(-1.0, 2, 2)
        with pytest.raises(DomainError):
            f_cdf(1.0, 0, 2)
        with pytest.raises(DomainError):
            f_quantile(1.0, 2, 2)
        with pytest.raises(DomainError):
            f_quantile(0.0, 2, 2)


class TestStudentTail:
    def test_zero(self):
        assert t_tail2(0.0, 3.0) == 1.0

    def test_cauchy(self):
        assert t_tail2(1.0, 1.0) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("x, df", [(2.5, 7.5), (0.3, 2.0), (-4.0, 40.0)])
    def test_square_is_f(self, x, df):
        assert t_tail2(x, df) == pytest.approx(f_sf(x * x, 1, df), rel=1e-10)

    def test_infinite_df_is_normal(self):
        from scipy import stats
        assert t_tail2(1.96, np.inf) == pytest.approx(2 * stats.norm.sf(1.96), rel=1e-12)

    def test_nan_propagates(self):
        assert np.isnan(t_tail2(np.nan, 4.0))
