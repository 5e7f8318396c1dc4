import pytest

from dppcond.checks.completeness import check_completeness
from dppcond.errors import NotAProjection
from dppcond.kernel.core import SiteSubset
from dppcond.kernel.factories import random_contraction, random_projection, uniform_rank1


def test_uniform_rank_one_exact():
    result = check_completeness(uniform_rank1(4), mode='exact')
    assert result.passed, result.details
    assert result.statistic == 0.0
    assert result.details['rank'] == 1
    assert result.details['configurations'] == 4
    assert result.details['min_gram_det'] == pytest.approx(0.25)


@pytest.mark.parametrize('complex_', [False, True])
def test_random_projection_monte_carlo(complex_):
    k = random_projection(6, 3, seed=2, complex=complex_)
    result = check_completeness(k, trials=200, seed=5, window=SiteSubset.of([1, 3, 5], 6))
    assert result.mode == 'mc'
    assert result.passed, result.details['failures']
    assert result.details['max_fixed_point_residual'] <= 1e-8


def test_random_projection_exact():
    result = check_completeness(random_projection(5, 2, seed=8), mode='exact')
    assert result.passed, result.details['failures']


def test_requires_projection():
    with pytest.raises(NotAProjection):
        check_completeness(random_contraction(4, seed=1))
