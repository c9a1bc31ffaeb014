from __future__ import annotations

import math

import numpy as np
import pytest
from app.core.errors import DomainError
from app.services import dist
from scipy import integrate


def test_closed_forms():
    assert dist.chi2_cdf(2.0 * math.log(2.0), 2) == pytest.approx(0.5, rel=1e-12)
    assert dist.normal_cdf(0.0) == pytest.approx(0.5)
    assert dist.t_cdf(0.0, 5) == pytest.approx(0.5)


@pytest.mark.parametrize("x", [0.5, 5.0, 20.0])
def test_chi2_quantile_inverts_cdf(x):
    assert dist.chi2_quantile(dist.chi2_cdf(x, 7), 7) == pytest.approx(x, abs=1e-8)


def test_cdfs_are_monotone_and_bounded():
    grid = np.linspace(0.0, 30.0, 301)
    for values in (dist.chi2_cdf(grid, 4), dist.f_cdf(grid, 3, 12)):
        assert np.all(np.diff(values) >= 0)
        assert values.min() >= 0.0 and values.max() <= 1.0


def test_sf_complements_cdf():
    assert dist.f_sf(2.0, 3, 10) == pytest.approx(1.0 - dist.f_cdf(2.0, 3, 10))
    assert dist.chi2_sf(3.0, 2) == pytest.approx(1.0 - dist.chi2_cdf(3.0, 2))


@pytest.mark.parametrize(
    "call",
    [
        lambda: dist.chi2_cdf(1.0, 0),
        lambda: dist.chi2_cdf(-1.0, 3),
        lambda: dist.chi2_quantile(1.0, 3),
        lambda: dist.f_cdf(1.0, 2, -1),
        lambda: dist.fisher_corr_density(0.0, 1),
        lambda: dist.fisher_corr_density(1.0, 5),
        lambda: dist.mrcv_tail_bound(0, 0.5),
        lambda: dist.mrcv_tail_bound(10, 0.0),
    ],
)
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()


def test_fisher_density_m3_is_uniform():
    for r in (-0.9, -0.3, 0.0, 0.5, 0.99):
        assert dist.fisher_corr_density(r, 3) == pytest.approx(0.5)


def test_fisher_density_integrates_to_one():
    total, _ = integrate.quad(lambda r: dist.fisher_corr_density(r, 50), -1, 1)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_fisher_density_variance():
    m = 100
    second, _ = integrate.quad(lambda r: r * r * dist.fisher_corr_density(r, m), -1, 1)
    assert second == pytest.approx(1.0 / m, rel=0.05)


def test_fisher_density_large_m_is_gaussian():
    m = 200
    grid = np.linspace(-0.1, 0.1, 21)
    approx = math.sqrt(m / (2 * math.pi)) * np.exp(-m * grid**2 / 2)
    np.testing.assert_allclose(dist.fisher_corr_density(grid, m), approx, rtol=0.02)


def test_fisher_density_large_m_does_not_overflow():
    value = dist.fisher_corr_density(0.0, 5000)
    assert math.isfinite(value)
    assert value == pytest.approx(math.sqrt(5000 / (2 * math.pi)), rel=0.01)


def test_fisher_cdf_matches_density():
    m = 12
    for r in (-0.5, 0.0, 0.3):
        mass, _ = integrate.quad(lambda u: dist.fisher_corr_density(u, m), -1, r)
        assert dist.fisher_corr_cdf(r, m) == pytest.approx(mass, abs=1e-8)


def test_mrcv_bound_is_nonincreasing_and_vanishes():
    grid = np.linspace(0.01, 5.0, 200)
    bounds = [dist.mrcv_tail_bound(30, float(d)) for d in grid]
    assert all(a >= b for a, b in zip(bounds, bounds[1:]))
    assert dist.mrcv_tail_bound(30, 1e6) < 1e-100
    assert dist.mrcv_tail_bound(30, math.inf) == 0.0


def test_mrcv_bound_dominates_chi2_exceedance():
    rng = np.random.default_rng(77)
    nu, delta = 50, 0.5
    draws = rng.chisquare(nu, size=100_000) / nu
    frequency = float(np.mean(np.abs(draws - 1.0) > delta))
    assert frequency <= dist.mrcv_tail_bound(nu, delta)
