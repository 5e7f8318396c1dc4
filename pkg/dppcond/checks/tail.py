"""Decay of the influence of far-away conditioning on a fixed head window.

For a head window D and depths d_1 < d_2 < ..., W_k is the complement of D
together with the first d_k sites after D in ground-set order. As the
conditioning window W_k recedes, chi_D K^{[X,W_k]} chi_D approaches
chi_D K chi_D in trace norm and the conditional gap probability of D
approaches det(1 - chi_D K chi_D).
"""

from __future__ import annotations

import logging
from collections import defaultdict
from typing import Sequence

import numpy as np

from dppcond.checks.base import ConditionalCache, CheckResult, make_result, mean_and_sigma, sampled_configurations, trace_counts
from dppcond.config import settings
from dppcond.errors import IndexOutOfRange, NotNested
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset, _check_mask
from dppcond.sampling.oracle import gap_probability, window_distribution
from dppcond.types import Mode
from dppcond.utils import max_abs, trace_norm

logger = logging.getLogger(__name__)


def tail_windows(head: SiteSubset, depths: Sequence[int]) -> list[SiteSubset]:
    """Conditioning windows W_k, the complement of head plus the next ``depths[k]`` sites."""

    if any(b <= a for a, b in zip(depths, depths[1:])) or any(d < 0 for d in depths):
        raise NotNested(f'depths {list(depths)} are not strictly increasing')
    rest = head.complement().indices
    windows = []
    for depth in depths:
        if depth > rest.size:
            raise IndexOutOfRange(f'depth {depth} exceeds the {rest.size} sites outside the head window')
        near = head.union(SiteSubset.of(rest[:depth], head.n))
        windows.append(near.complement())
    return windows


def check_tail_mixing(
    k: KernelMatrix,
    head: SiteSubset,
    depths: Sequence[int],
    mode: Mode = 'mc',
    trials: int = 1000,
    seed: int = 0,
    threshold: float = 0.01,
) -> CheckResult:
    """Kernel and event statistics per depth.

    Passes when both curves are non-increasing up to ``tail_noise_sigmas``
    standard errors per step and the deepest event statistic is at most
    ``threshold``.
    """

    _check_mask(k.n, head)
    depths = [int(d) for d in depths]
    windows = tail_windows(head, depths)
    d = head.indices
    k_dd = k.entries[np.ix_(d, d)]
    eye = np.eye(d.size)
    base_gap = gap_probability(k, head)
    caches = [ConditionalCache(k, w) for w in windows]

    def head_block(stage: int, xi: Configuration) -> np.ndarray:
        return caches[stage].get(xi).matrix.entries[np.ix_(d, d)]

    def stats(g_dd: np.ndarray) -> tuple[float, float]:
        event = abs(float(np.real(np.linalg.det(eye - g_dd))) - base_gap) if d.size else 0.0
        return trace_norm(g_dd - k_dd), event

    configs = sampled_configurations(k, trials, seed) if mode == 'mc' else None
    curve = []
    supports = []
    for stage, (depth, window) in enumerate(zip(depths, windows)):
        if mode == 'exact':
            support = window_distribution(k, window).support()
            supports.append(support)
            weighted = [(xi, p) for xi, p in support]
        else:
            weighted = list(trace_counts(configs, window).items())
        values = np.array([stats(head_block(stage, xi)) for xi, _ in weighted]).reshape(-1, 2)
        weights = np.array([w for _, w in weighted], dtype=float)
        if mode == 'exact':
            weights = weights / weights.sum()
            kernel_stat, event_stat = (weights @ values).tolist()
            kernel_sigma = event_sigma = 0.0
        else:
            kernel_stat, kernel_sigma = mean_and_sigma(values[:, 0], weights)
            event_stat, event_sigma = mean_and_sigma(values[:, 1], weights)
        curve.append({
            'depth': depth,
            'window_size': window.size,
            'kernel_stat': kernel_stat,
            'kernel_sigma': kernel_sigma,
            'event_stat': event_stat,
            'event_sigma': event_sigma,
        })

    excess = 0.0
    slack = settings.exact_tol if mode == 'exact' else 0.0
    for before, after in zip(curve, curve[1:]):
        for name in ('kernel', 'event'):
            noise = np.hypot(before[f'{name}_sigma'], after[f'{name}_sigma'])
            rise = after[f'{name}_stat'] - before[f'{name}_stat']
            excess = max(excess, rise - settings.tail_noise_sigmas * noise - slack)

    details: dict = {'curve': curve, 'monotonicity_excess': excess, 'threshold': threshold}
    if mode == 'exact':
        residual = 0.0
        for stage in range(len(windows) - 1):
            coarse = windows[stage + 1]
            groups: dict[Configuration, list] = defaultdict(lambda: [0.0, 0.0])
            for xi, p in supports[stage]:
                acc = groups[xi.restrict(coarse)]
                acc[0] += p
                acc[1] = acc[1] + p * head_block(stage, xi)
            for eta, (mass, total) in groups.items():
                if mass > settings.positive_prob_tol:
                    residual = max(residual, max_abs(total / mass - head_block(stage + 1, eta)))
        details['reverse_martingale_residual'] = residual
        if residual > settings.exact_tol:
            excess = max(excess, residual)

    final = curve[-1]['event_stat'] if curve else 0.0
    statistic = final if excess <= 0 else max(final, threshold + excess)
    if excess > 0:
        logger.warning('tail statistics rise beyond noise by %.3e', excess)
    return make_result('tail_mixing', mode, statistic, threshold, seed, details)
