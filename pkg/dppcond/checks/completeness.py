"""Completeness of sampled kernel columns for projection kernels.

For a projection kernel of rank r almost every configuration X has exactly
r points, the columns K_x (x in X) span Ran K, no nonzero h in Ran K
vanishes on X, and for every window B the conditional kernel on B given X
outside B fixes chi_B h whenever h in Ran K vanishes on X outside B.
"""

from __future__ import annotations

import logging
from collections import Counter

import numpy as np
import scipy.linalg as sla

from dppcond.checks.base import CheckResult, make_result, sampled_configurations
from dppcond.conditional.kernels import conditional_kernel
from dppcond.config import settings
from dppcond.errors import NotAProjection
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset, _check_mask
from dppcond.sampling.oracle import DppDistribution, enumerate_distribution
from dppcond.types import Mode

logger = logging.getLogger(__name__)

_GRAM_RANK_TOL = 1e-10
_FIXED_POINT_TOL = 1e-8
_MAX_LISTED = 20


def _fixed_point_residual(k: KernelMatrix, basis: np.ndarray, x: Configuration, window: SiteSubset) -> float:
    outside = window.complement()
    ck = conditional_kernel(k, x, outside)
    if not ck.regular:
        return float('inf')
    off = [i for i in x.indices if not window.mask[i]]
    h = basis @ sla.null_space(basis[off, :], rcond=settings.rank_tol) if off else basis
    if not h.shape[1]:
        return 0.0
    inside = h * window.mask[:, None]
    return float(np.max(np.linalg.norm(ck.matrix.entries @ inside - inside, axis=0)))


def _count_positive(dist: DppDistribution, x: Configuration, window: SiteSubset) -> bool:
    outside = window.complement()
    law = dist.condition(outside, x.restrict(outside)).count_law(window)
    return bool(law[x.count_in(window)] > settings.positive_prob_tol)


def check_completeness(
    k: KernelMatrix,
    trials: int = 1000,
    seed: int = 0,
    mode: Mode = 'mc',
    window: SiteSubset | None = None,
    tolerance: float | None = None,
) -> CheckResult:
    """Failure count over sampled (or, in exact mode, all positive-probability) configurations."""

    if not k.is_projection:
        raise NotAProjection('completeness is defined for projection kernels')
    window = SiteSubset.of(range(k.n // 2), k.n) if window is None else window
    _check_mask(k.n, window)
    rank = int(round(k.trace))
    w, v = k.spectrum
    basis = v[:, w > 0.5]

    dist = None
    if mode == 'exact':
        dist = enumerate_distribution(k)
        weighted = Counter({x: 1 for x, _ in dist.support()})
    else:
        weighted = Counter(sampled_configurations(k, trials, seed))

    failures = 0
    listed: list[dict] = []
    min_det = float('inf')
    max_fixed = 0.0
    for x, count in sorted(weighted.items(), key=lambda item: item[0].indices):
        idx = list(x.indices)
        gram = k.entries[np.ix_(idx, idx)]
        det = float(np.real(np.linalg.det(gram))) if idx else 1.0
        min_det = min(min_det, det)
        problems = []
        if len(x) != rank:
            problems.append('cardinality')
        gram_rank = int(np.linalg.matrix_rank(gram, tol=_GRAM_RANK_TOL)) if idx else 0
        if gram_rank != rank:
            problems.append('gram_rank')
        if idx and sla.null_space(basis[idx, :], rcond=settings.rank_tol).shape[1]:
            problems.append('evaluation_kernel')
        fixed = _fixed_point_residual(k, basis, x, window)
        max_fixed = max(max_fixed, fixed)
        if fixed > _FIXED_POINT_TOL:
            problems.append('fixed_point')
        if dist is not None and not _count_positive(dist, x, window):
            problems.append('count_positivity')
        if problems:
            failures += count
            logger.warning('completeness failure at %s: %s (Gram determinant %.3e)', idx, problems, det)
            if len(listed) < _MAX_LISTED:
                listed.append({'config': idx, 'problems': problems, 'gram_det': det})

    details = {
        'rank': rank,
        'configurations': len(weighted),
        'min_gram_det': min_det if weighted else None,
        'max_fixed_point_residual': max_fixed,
        'failures': listed,
    }
    return make_result('completeness', mode, failures, 0.0 if tolerance is None else tolerance, seed, details)
