"""
Tests du lissage de tendance
"""

import logging

import numpy as np
import pytest

from robust_ebayes.ebayes import fit_trend
from robust_ebayes.exceptions import DataError, DomainError


class TestFitTrend:
    def test_constant_input(self, rng):
        a = rng.uniform(0, 10, size=200)
        fitted = fit_trend(np.full(200, 1.7), a)
        np.testing.assert_array_equal(fitted, np.full(200, 1.7))

    def test_line_reproduced(self, rng):
        a = rng.uniform(0, 10, size=300)
        z = 0.5 - 0.2 * a
        np.testing.assert_allclose(fit_trend(z, a, robust=False), z, atol=1e-6)

    def test_noise_reduced(self, rng):
        a = np.sort(rng.uniform(0, 6, size=2000))
        z = np.sin(a) + rng.normal(0, 0.3, size=a.size)
        fitted = fit_trend(z, a)
        assert np.var(z - fitted) < np.var(z)
        assert np.max(np.abs(fitted - np.sin(a))) < 0.3

    def test_robust_ignores_outliers(self, rng):
        a = rng.uniform(0, 10, size=500)
        z = 1.0 + 0.1 * a
        contaminated = z.copy()
        contaminated[:25] += 20.0
        robust = fit_trend(contaminated, a, robust=True)
        plain = fit_trend(contaminated, a, robust=False)
        clean = np.arange(25, 500)
        assert np.max(np.abs(robust[clean] - z[clean])) < np.max(np.abs(plain[clean] - z[clean]))

    def test_order_does_not_matter(self, rng):
        a = rng.uniform(0, 10, size=200)
        z = np.cos(a) + rng.normal(0, 0.1, size=200)
        order = rng.permutation(200)
        np.testing.assert_allclose(fit_trend(z, a)[order], fit_trend(z[order], a[order]), rtol=1e-10)

    def test_few_genes_fall_back_to_mean(self, caplog):
        z = np.arange(10, dtype=float)
        with caplog.at_level(logging.WARNING):
            fitted = fit_trend(z, np.arange(10, dtype=float))
        np.testing.assert_allclose(fitted, np.full(10, 4.5))
        assert "constant" in caplog.text

    def test_constant_covariate(self, rng):
        z = rng.normal(size=100)
        np.testing.assert_allclose(fit_trend(z, np.ones(100)), np.full(100, z.mean()))

    def test_invalid_input(self):
        with pytest.raises(DataError):
            fit_trend(np.ones(3), np.ones(4))
        with pytest.raises(DataError):
            fit_trend(np.array([1.0, np.nan]), np.ones(2))
        with pytest.raises(DomainError):
            fit_trend(np.ones(100), np.arange(100.0), span=0.0)
