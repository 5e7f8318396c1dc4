"""Martingale identities of conditional kernels.

The one-step identity averages K^{[X,B]} over the law of X intersected with
B and compares it with chi_{B^c} K chi_{B^c}. The sequence check does the
same stage by stage along nested windows, for the quadratic form of a test
vector, for the full matrix, for the second exterior power and for the
second moment of a linear statistic.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from itertools import combinations
from typing import Sequence

import numpy as np

from dppcond.checks.base import ConditionalCache, CheckResult, exact_tolerance, make_result, sampled_configurations, trace_counts
from dppcond.config import settings
from dppcond.errors import DimensionMismatch, NotNested, SupportViolation
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset, _check_mask, compress
from dppcond.sampling.oracle import window_distribution
from dppcond.types import Mode
from dppcond.utils import max_abs

logger = logging.getLogger(__name__)


def check_one_step_martingale(
    k: KernelMatrix,
    window: SiteSubset,
    mode: Mode = 'exact',
    trials: int = 1000,
    seed: int = 0,
    tolerance: float | None = None,
) -> CheckResult:
    _check_mask(k.n, window)
    outside = window.complement()
    target = compress(k, outside, outside)
    cache = ConditionalCache(k, window)

    if mode == 'exact':
        average = np.zeros_like(k.entries)
        support = window_distribution(k, window).support()
        for xi, p in support:
            average += p * cache.get(xi).matrix.entries
        statistic = max_abs(average - target)
        tol = exact_tolerance(tolerance)
        details = {'traces': len(support)}
    else:
        counts = trace_counts(sampled_configurations(k, trials, seed), window)
        first = np.zeros_like(k.entries)
        second = np.zeros(k.entries.shape)
        for xi, c in counts.items():
            g = cache.get(xi).matrix.entries
            first += c * g
            second += c * np.abs(g) ** 2
        mean = first / trials
        var = np.clip(second / trials - np.abs(mean) ** 2, 0.0, None) * trials / max(trials - 1, 1)
        sigma = float(np.sqrt(var.max() / trials))
        statistic = max_abs(mean - target)
        tol = settings.mc_sigmas * sigma + settings.exact_tol if tolerance is None else float(tolerance)
        details = {'traces': len(counts), 'sigma': sigma, 'trials': trials}

    degenerate = cache.degenerate_traces
    if degenerate and mode == 'exact':
        logger.warning('degenerate conditional kernels on positive-probability traces: %s', degenerate)
    details['degenerate_traces'] = [list(t) for t in degenerate]
    return make_result('one_step_martingale', mode, statistic, tol, seed, details)


def second_compound(m: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """All 2x2 minors of ``m`` with rows and columns drawn from ``sites`` (pairs in lexicographic order)."""
    pairs = list(combinations(sites, 2))
    if not pairs:
        return np.zeros((0, 0), dtype=m.dtype)
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    return m[np.ix_(i, i)] * m[np.ix_(j, j)] - m[np.ix_(i, j)] * m[np.ix_(j, i)]


def linear_statistic_second_moment(k: KernelMatrix, g: np.ndarray) -> float:
    """E[S_g^2] for S_g = sum of g over the configuration."""
    diag = np.real(np.diagonal(k.entries))
    mean = float(np.sum(g * diag))
    variance = float(np.sum(g * g * diag) - np.real(np.sum(np.outer(g, g) * np.abs(k.entries) ** 2)))
    return variance + mean * mean


def check_martingale_sequence(
    k: KernelMatrix,
    windows: Sequence[SiteSubset],
    outer: SiteSubset,
    phi: np.ndarray,
    g: np.ndarray | None = None,
    tolerance: float | None = None,
    seed: int = 0,
) -> CheckResult:
    """Exact martingale residuals along empty = B_0, B_1, ..., B_m inside W = ``outer``.

    The statistic is the largest of the quadratic-form residual for ``phi``,
    the matrix residual, the second exterior power residual and any excess
    of E[(E[S_g | X cap B_n])^2] over E[S_g^2].
    """

    _check_mask(k.n, outer, *windows)
    stages = [SiteSubset.empty(k.n), *windows]
    for inner, bigger in zip(stages, stages[1:]):
        if not inner.issubset(bigger):
            raise NotNested(f'{inner} is not contained in {bigger}')
    if not stages[-1].issubset(outer):
        raise NotNested(f'{stages[-1]} is not contained in the outer window {outer}')

    phi = np.asarray(phi)
    if phi.shape != (k.n,):
        raise DimensionMismatch(f'test vector of shape {phi.shape} for {k.n} sites')
    if np.any(phi[outer.mask] != 0):
        raise SupportViolation('the test vector must vanish on the outer window')
    g = np.abs(phi) ** 2 if g is None else np.asarray(g, dtype=float)
    if np.any(g[outer.mask] != 0):
        raise SupportViolation('the linear statistic must vanish on the outer window')

    free = outer.complement()
    free_sites = free.indices.tolist()
    caches = [ConditionalCache(k, stage) for stage in stages]

    def reduced(stage: int, xi: Configuration) -> np.ndarray:
        return compress(caches[stage].get(xi).matrix, free, free)

    def quad(m: np.ndarray) -> float:
        return float(np.real(np.vdot(phi, m @ phi)))

    def linear(m: np.ndarray) -> float:
        return float(np.sum(g * np.real(np.diagonal(m))))

    phi_res = matrix_res = ext_res = l2_excess = 0.0
    l2_bound = linear_statistic_second_moment(k, g)
    l2_curve = []
    for n in range(len(stages) - 1):
        coarse, fine = stages[n], stages[n + 1]
        groups: dict[Configuration, list] = defaultdict(lambda: [0.0, 0.0, 0.0])
        for eta, p in window_distribution(k, fine).support():
            m = reduced(n + 1, eta)
            acc = groups[eta.restrict(coarse)]
            acc[0] += p
            acc[1] = acc[1] + p * m
            acc[2] = acc[2] + p * second_compound(m, free_sites)
        for xi, (mass, mat_sum, ext_sum) in groups.items():
            if mass <= settings.positive_prob_tol:
                continue
            expected = mat_sum / mass
            current = reduced(n, xi)
            phi_res = max(phi_res, abs(quad(expected) - quad(current)))
            matrix_res = max(matrix_res, max_abs(expected - current))
            ext_res = max(ext_res, max_abs(ext_sum / mass - second_compound(current, free_sites)))

    for n, stage in enumerate(stages):
        lhs = sum(p * linear(reduced(n, xi)) ** 2 for xi, p in window_distribution(k, stage).support())
        l2_curve.append({'stage': n, 'window_size': stage.size, 'lhs': lhs, 'bound': l2_bound})
        l2_excess = max(l2_excess, lhs - l2_bound)

    statistic = max(phi_res, matrix_res, ext_res, l2_excess)
    details = {
        'phi_residual': phi_res,
        'matrix_residual': matrix_res,
        'exterior_residual': ext_res,
        'l2_excess': l2_excess,
        'l2_curve': l2_curve,
        'stages': [s.size for s in stages],
    }
    return make_result('martingale_sequence', 'exact', statistic, exact_tolerance(tolerance), seed, details)
