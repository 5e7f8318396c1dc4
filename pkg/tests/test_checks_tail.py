import numpy as np
import pytest

from dppcond.checks.tail import check_tail_mixing, tail_windows
from dppcond.errors import IndexOutOfRange, NotNested
from dppcond.kernel.core import SiteSubset
from dppcond.kernel.factories import diagonal, random_contraction, uniform_rank1


def test_tail_windows_recede():
    head = SiteSubset.of([0, 1], 6)
    windows = tail_windows(head, [0, 2, 4])
    assert [w.indices.tolist() for w in windows] == [[2, 3, 4, 5], [4, 5], []]
    with pytest.raises(NotNested):
        tail_windows(head, [2, 2])
    with pytest.raises(IndexOutOfRange):
        tail_windows(head, [5])


def test_uniform_particle_curve_by_hand():
    result = check_tail_mixing(uniform_rank1(6), SiteSubset.of([0], 6), range(6), mode='exact')
    curve = result.details['curve']
    expected = [(10 - 2 * d) / 36 for d in range(6)]
    np.testing.assert_allclose([row['event_stat'] for row in curve], expected, atol=1e-12)
    np.testing.assert_allclose([row['kernel_stat'] for row in curve], expected, atol=1e-12)
    assert result.details['reverse_martingale_residual'] <= 1e-12
    assert result.passed
    assert result.tolerance == 0.01


def test_independent_sites_have_no_tail():
    k = diagonal([0.2, 0.4, 0.6, 0.8])
    for mode in ('exact', 'mc'):
        result = check_tail_mixing(k, SiteSubset.of([0], 4), [0, 1, 2], mode=mode, trials=100, seed=1)
        assert result.passed
        assert max(row['kernel_stat'] for row in result.details['curve']) <= 1e-12


def test_monte_carlo_curve_on_random_kernel():
    k = random_contraction(8, seed=3)
    result = check_tail_mixing(k, SiteSubset.of([0, 1], 8), [0, 3, 6], mode='mc', trials=500, seed=2, threshold=0.5)
    curve = result.details['curve']
    assert len(curve) == 3 and curve[-1]['window_size'] == 0
    assert curve[-1]['event_stat'] == pytest.approx(0.0, abs=1e-12)
    assert result.passed, result.details


def test_failure_above_threshold():
    result = check_tail_mixing(uniform_rank1(6), SiteSubset.of([0], 6), [0, 1], mode='exact', threshold=0.01)
    assert result.statistic == pytest.approx(8 / 36)
    assert not result.passed
