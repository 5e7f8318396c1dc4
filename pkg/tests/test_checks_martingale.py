import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from dppcond.checks.martingale import (
    check_martingale_sequence,
    check_one_step_martingale,
    linear_statistic_second_moment,
    second_compound,
)
from dppcond.errors import NotNested, SupportViolation
from dppcond.kernel.core import SiteSubset
from dppcond.kernel.factories import diagonal, random_contraction, random_projection, scaled_ones
from dppcond.sampling.oracle import enumerate_distribution


def test_one_step_by_hand():
    result = check_one_step_martingale(scaled_ones(2, 0.5), SiteSubset.of([0], 2))
    assert result.passed
    assert result.statistic <= 1e-12
    assert result.details['traces'] == 2
    assert result.to_json()['pass'] is True


@hsettings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_one_step_exact_on_random_kernels(seed, complex_):
    k = random_contraction(6, seed, complex_)
    result = check_one_step_martingale(k, SiteSubset.of([1, 2, 5], 6))
    assert result.statistic <= 1e-9


def test_one_step_on_projection_with_degenerate_traces():
    k = random_projection(6, 4, seed=3)
    result = check_one_step_martingale(k, SiteSubset.of([0, 1, 2, 3], 6))
    assert result.passed


def test_one_step_monte_carlo_on_independent_sites():
    result = check_one_step_martingale(diagonal([0.2, 0.5, 0.7]), SiteSubset.of([0], 3), mode='mc', trials=200, seed=4)
    assert result.mode == 'mc'
    assert result.details['sigma'] == 0.0
    assert result.passed


def test_one_step_monte_carlo_within_noise():
    k = random_contraction(5, seed=8)
    result = check_one_step_martingale(k, SiteSubset.of([0, 1], 5), mode='mc', trials=2000, seed=11)
    assert result.details['sigma'] > 0
    assert result.passed


def test_negative_tolerance_fails():
    result = check_one_step_martingale(scaled_ones(2, 0.5), SiteSubset.of([0], 2), tolerance=-1.0)
    assert not result.passed


def test_sequence_passes_on_random_kernel():
    k = random_contraction(6, seed=2, complex=True)
    outer = SiteSubset.of([0, 1, 2, 3], 6)
    windows = [SiteSubset.of([0], 6), SiteSubset.of([0, 1], 6), outer]
    phi = np.array([0, 0, 0, 0, 1.0, -0.5])
    result = check_martingale_sequence(k, windows, outer, phi)
    assert result.passed, result.details
    assert result.details['stages'] == [0, 1, 2, 4]
    curve = result.details['l2_curve']
    assert all(row['lhs'] <= row['bound'] + 1e-12 for row in curve)


def test_sequence_input_errors():
    k = random_contraction(4, seed=1)
    outer = SiteSubset.of([0, 1], 4)
    phi = np.array([0, 0, 1.0, 1.0])
    with pytest.raises(NotNested):
        check_martingale_sequence(k, [SiteSubset.of([0, 1], 4), SiteSubset.of([0], 4)], outer, phi)
    with pytest.raises(NotNested):
        check_martingale_sequence(k, [SiteSubset.of([2], 4)], outer, phi)
    with pytest.raises(SupportViolation):
        check_martingale_sequence(k, [SiteSubset.of([0], 4)], outer, np.ones(4))


def test_second_compound_of_identity():
    m = second_compound(np.eye(3), [0, 1, 2])
    np.testing.assert_allclose(m, np.eye(3))
    assert second_compound(np.eye(3), [0]).shape == (0, 0)


def test_linear_statistic_second_moment_matches_enumeration():
    k = random_contraction(4, seed=5)
    g = np.array([1.0, -2.0, 0.5, 3.0])
    law = enumerate_distribution(k)
    exact = sum(p * sum(g[i] for i in x.indices) ** 2 for x, p in law.support(tol=0.0))
    assert linear_statistic_second_moment(k, g) == pytest.approx(exact, abs=1e-12)
