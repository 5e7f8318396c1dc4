import numpy as np
import pytest

from dppcond.checks.variance import check_variance_bound
from dppcond.errors import DimensionMismatch, SupportViolation
from dppcond.kernel.core import SiteSubset
from dppcond.kernel.factories import diagonal, random_contraction, random_projection, scaled_ones


def test_rank_one_case_attains_the_bound():
    result = check_variance_bound(scaled_ones(2, 0.5), SiteSubset.of([0], 2), np.array([0.0, 1.0]))
    assert result.passed, result.details
    assert result.details['variance'] == pytest.approx(0.25)
    assert result.details['bound'] == pytest.approx(0.25)
    assert result.details['dominating_residual'] <= 1e-12


def test_independent_sites_have_no_variance():
    k = diagonal([0.3, 0.6, 0.2])
    result = check_variance_bound(k, SiteSubset.of([0], 3), np.array([0.0, 1.0, -2.0]))
    assert result.details['variance'] == pytest.approx(0.0, abs=1e-15)
    assert result.details['bound'] == 0.0
    assert result.passed


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_random_contraction_through_dilation(seed):
    k = random_contraction(6, seed=seed, complex=True)
    window = SiteSubset.of([0, 1, 2], 6)
    rng = np.random.default_rng(seed)
    phi = np.zeros(6, dtype=complex)
    phi[3:] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    result = check_variance_bound(k, window, phi)
    assert result.passed, result.details
    assert result.details['dilation_agreement'] <= 1e-9
    assert result.details['dilated_dominating_residual'] <= 1e-9


def test_projection_dominating_identity():
    k = random_projection(6, 3, seed=4)
    phi = np.array([0, 0, 1.0, -1.0, 0.5, 2.0])
    result = check_variance_bound(k, SiteSubset.of([0, 1], 6), phi, use_dilation=False)
    assert result.passed, result.details
    assert 'dilation_agreement' not in result.details


def test_monte_carlo_mode():
    k = random_contraction(5, seed=7)
    phi = np.array([0, 0, 1.0, 1.0, 1.0])
    result = check_variance_bound(k, SiteSubset.of([0, 1], 5), phi, mode='mc', trials=500, seed=3)
    assert result.mode == 'mc'
    assert result.details['sigma'] >= 0.0
    assert result.passed, result.details


def test_test_vector_validation():
    k = random_contraction(3, seed=1)
    window = SiteSubset.of([0], 3)
    with pytest.raises(SupportViolation):
        check_variance_bound(k, window, np.ones(3))
    with pytest.raises(DimensionMismatch):
        check_variance_bound(k, window, np.zeros(4))
