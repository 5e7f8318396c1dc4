import numpy as np
import pytest

from dppcond.checks.consistency import (
    check_dilation,
    check_limit_convergence,
    check_method_agreement,
    check_sampler_agreement,
    sampler_count_band,
)
from dppcond.errors import ExhaustionNotNested
from dppcond.kernel.core import Configuration, SiteSubset
from dppcond.kernel.factories import diagonal, random_contraction, random_projection, uniform_rank1


@pytest.mark.parametrize('kernel', [
    diagonal([0.0, 0.3, 1.0]),
    random_contraction(5, seed=2, complex=True),
    random_projection(4, 2, seed=1),
])
def test_dilation(kernel):
    result = check_dilation(kernel)
    assert result.passed, result.details
    assert result.details['flagged_projection']


def test_sampler_matches_enumeration():
    result = check_sampler_agreement(uniform_rank1(3), trials=2000, seed=3)
    assert result.mode == 'mc'
    assert result.passed, result.details
    assert result.details['tv'] < 0.05


def test_sampler_on_random_contraction():
    result = check_sampler_agreement(random_contraction(4, seed=9, complex=True), trials=3000, seed=1)
    assert result.passed, result.details


def test_count_band_handles_rounded_certainties():
    lo, hi = sampler_count_band(np.array([0.0, 1.0000000000000002, 0.5, -1e-17]), 100, 4.0)
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
    assert (lo[0], hi[0]) == (0.0, 0.0) and (lo[3], hi[3]) == (0.0, 0.0)
    assert (lo[1], hi[1]) == (100.0, 100.0)
    assert lo[2] < 50 < hi[2]


@pytest.mark.parametrize('n', [2, 3, 5])
def test_sampler_agreement_on_full_rank_projection(n):
    result = check_sampler_agreement(random_projection(n, n, seed=n), trials=500, seed=4)
    assert result.statistic < 1e-9
    assert result.passed, result.details


def test_sampler_agreement_on_ten_sites():
    result = check_sampler_agreement(random_contraction(10, seed=84), trials=2000, seed=6)
    assert np.isfinite(result.statistic)
    assert result.passed, result.details


@pytest.mark.parametrize('kernel', [
    random_contraction(5, seed=4),
    random_projection(5, 2, seed=6, complex=True),
])
def test_method_agreement(kernel):
    result = check_method_agreement(kernel, SiteSubset.of([0, 1], 5))
    assert result.passed, result.details
    assert result.details['status_mismatches'] == 0
    assert result.details['degenerate_reasons'] == {}


def test_limit_convergence():
    k = random_contraction(6, seed=5)
    window = SiteSubset.of([0, 1, 2], 6)
    stages = [SiteSubset.of([0], 6), SiteSubset.of([0, 1], 6), window]
    result = check_limit_convergence(k, window, stages, seed=4)
    assert result.passed, result.details
    assert [row['window_size'] for row in result.details['curve']] == [1, 2, 3]
    assert result.details['curve'][-1]['trace_distance'] == 0.0

    fixed = check_limit_convergence(k, window, stages, x=Configuration((1, 4)))
    assert fixed.details['configuration'] == [1, 4]
    with pytest.raises(ExhaustionNotNested):
        check_limit_convergence(k, window, stages[:2])
