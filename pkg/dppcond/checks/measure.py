"""Consistency of conditional laws computed by enumeration and by kernels."""

from __future__ import annotations

import logging

import numpy as np

from dppcond.checks.base import CheckResult, exact_tolerance, make_result
from dppcond.conditional.kernels import conditional_kernel
from dppcond.config import settings
from dppcond.errors import WindowsOverlap, ZeroProbabilityCondition
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset, _check_mask
from dppcond.sampling.oracle import DppDistribution, enumerate_distribution, total_variation, window_distribution

logger = logging.getLogger(__name__)


def _kernel_slices(p: DppDistribution, k: KernelMatrix, window: SiteSubset) -> float:
    """Largest TV distance between the Bayes slice and the law of K^{[xi,B]} on B^c."""
    worst = 0.0
    outside = window.complement()
    for xi, _ in p.marginal(window).support():
        slice_ = p.condition(window, xi)
        ck = conditional_kernel(k, xi, window)
        worst = max(worst, total_variation(slice_, window_distribution(ck.matrix, outside)))
    return worst


def _push_forward(p: DppDistribution, k: KernelMatrix, w1: SiteSubset, w2: SiteSubset) -> tuple[float, float]:
    """Conditioning the (W1 u W2)-marginal on W1 against the W2-marginal of the W1-conditional."""
    union = w1.union(w2)
    joint = p.marginal(union)
    laws = worst_kernel = 0.0
    for xi, _ in p.marginal(w1).support():
        lhs = joint.condition(w1, xi)
        rhs = p.condition(w1, xi).marginal(w2)
        laws = max(laws, total_variation(lhs, rhs))
        ck = conditional_kernel(k, xi, w1)
        worst_kernel = max(worst_kernel, total_variation(window_distribution(ck.matrix, w2), rhs))
    return laws, worst_kernel


def _measure_martingale(p: DppDistribution, w1: SiteSubset, w2: SiteSubset) -> float:
    """P(. | X cap W1) on the rest against the mixture of P(. | X cap (W1 u W2))."""
    union = w1.union(w2)
    rest = union.complement()
    worst = 0.0
    for xi, _ in p.marginal(w1).support():
        given = p.condition(w1, xi)
        lhs = given.marginal(rest)
        mixture = np.zeros_like(lhs.probs)
        for eta, weight in given.marginal(w2).support():
            try:
                finer = p.condition(union, Configuration.of(xi.indices + eta.indices)).probs * weight
            except ZeroProbabilityCondition:
                continue
            mixture = mixture + finer
        worst = max(worst, 0.5 * float(abs(lhs.probs - mixture).sum()))
    return worst


def _count_violations(p: DppDistribution, window: SiteSubset) -> int:
    outside = window.complement()
    bad = 0
    for x, _ in p.support():
        law = p.condition(outside, x.restrict(outside)).count_law(window)
        if law[x.count_in(window)] <= settings.positive_prob_tol:
            bad += 1
    return bad


def check_measure_consistency(
    k: KernelMatrix,
    window: SiteSubset,
    first: SiteSubset,
    second: SiteSubset,
    tolerance: float | None = None,
    seed: int = 0,
) -> CheckResult:
    _check_mask(k.n, window, first, second)
    if not first.isdisjoint(second):
        raise WindowsOverlap(f'{first} and {second} share sites')
    p = enumerate_distribution(k)

    slices = _kernel_slices(p, k, window)
    push_laws, push_kernel = _push_forward(p, k, first, second)
    martingale = _measure_martingale(p, first, second)
    violations = _count_violations(p, window)
    if violations:
        logger.warning('%d configurations violate conditional count positivity', violations)

    details = {
        'conditional_tv': slices,
        'push_forward_tv': push_laws,
        'push_forward_kernel_tv': push_kernel,
        'measure_martingale_tv': martingale,
        'count_violations': violations,
    }
    statistic = max(slices, push_laws, push_kernel, martingale, float(violations > 0))
    return make_result('measure_consistency', 'exact', statistic, exact_tolerance(tolerance), seed, details)
