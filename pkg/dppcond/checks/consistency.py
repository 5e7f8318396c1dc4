"""Agreement between independent routes to the same object.

The dilation against its defining block structure, the sampler against the
enumeration oracle, the conditional-kernel constructions against each
other, and a convergence trace along an exhaustion.
"""

from __future__ import annotations

import logging
from collections import Counter
from typing import Sequence

import numpy as np
from scipy import stats

from dppcond.checks.base import CheckResult, exact_tolerance, make_result, sampled_configurations, traces
from dppcond.conditional.kernels import (
    conditional_kernel,
    conditional_kernel_neumann,
    conditional_limit,
    projection_conditional_subspace,
)
from dppcond.conditional.palm import palm_many
from dppcond.config import settings
from dppcond.errors import NotContractive
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset, _check_mask, compress, dilate_to_projection
from dppcond.sampling.oracle import enumerate_distribution, total_variation, DppDistribution
from dppcond.sampling.sampler import sample_dpp
from dppcond.sampling.rng import trial_generator
from dppcond.utils import max_abs, trace_norm

logger = logging.getLogger(__name__)


def check_dilation(k: KernelMatrix, tolerance: float | None = None, seed: int = 0) -> CheckResult:
    dilated = dilate_to_projection(k)
    m = dilated.entries
    n = k.n
    projection = max_abs(m @ m - m)
    corner = max_abs(m[:n, :n] - k.entries)
    complement = max_abs(m[n:, n:] - (np.eye(n) - k.entries))
    details = {
        'projection_residual': projection,
        'corner_residual': corner,
        'complement_residual': complement,
        'flagged_projection': dilated.is_projection,
    }
    statistic = max(projection, corner, complement)
    return make_result('dilation', 'exact', statistic, exact_tolerance(tolerance), seed, details)


def sampler_count_band(p: np.ndarray, trials: int, sigmas: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-subset binomial count band at the two-sided level of ``sigmas`` normal sigmas.

    The level is split evenly over the subsets. Probabilities are clipped to
    [0, 1] first; certain and impossible subsets get a zero-width band.
    """

    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    level = 2.0 * stats.norm.sf(sigmas) / max(p.size, 1)
    interior = (p > 0.0) & (p < 1.0)
    safe = np.where(interior, p, 0.5)
    lo = np.where(interior, stats.binom.ppf(level / 2, trials, safe), trials * p)
    hi = np.where(interior, stats.binom.isf(level / 2, trials, safe), trials * p)
    return lo, hi


def check_sampler_agreement(
    k: KernelMatrix, trials: int = 1000, seed: int = 0, tolerance: float | None = None
) -> CheckResult:
    """Largest per-subset count deviation in units of its binomial band half-width."""

    law = enumerate_distribution(k)
    configs = sampled_configurations(k, trials, seed)
    counts = np.zeros_like(law.probs)
    for c in configs:
        counts[c.bitmask(law.sites)] += 1
    p = np.clip(law.probs, 0.0, 1.0)
    expected = trials * p
    lo, hi = sampler_count_band(p, trials, settings.mc_sigmas)
    above = (counts - expected) / np.maximum(hi - expected, 0.5)
    below = (expected - counts) / np.maximum(expected - lo, 0.5)
    z = np.where(counts >= expected, above, below)
    empirical = DppDistribution(counts / trials, law.sites, law.n)
    worst = int(np.argmax(z))
    details = {
        'tv': total_variation(empirical, law),
        'worst_subset': worst,
        'worst_band': [float(lo[worst]), float(hi[worst])],
        'worst_count': int(counts[worst]),
        'trials': trials,
    }
    return make_result('sampler_agreement', 'mc', float(z.max()), 1.0 if tolerance is None else tolerance, seed, details)


def check_method_agreement(
    k: KernelMatrix, window: SiteSubset, tolerance: float | None = None, seed: int = 0
) -> CheckResult:
    """Direct, Neumann, projection-subspace and both Palm routes over every positive-probability trace."""

    _check_mask(k.n, window)
    neumann_res = palm_res = subspace_res = 0.0
    skipped_neumann = mismatched = degenerate = 0
    reasons: Counter[str] = Counter()
    trace_list = traces(k, window, 'exact')
    for xi, _ in trace_list:
        direct = conditional_kernel(k, xi, window)
        if not direct.regular:
            degenerate += 1
            reasons[direct.metadata.get('reason', 'unknown')] += 1
        recursive = palm_many(k, xi.indices, method='recursive')
        ratio = palm_many(k, xi.indices, method='det_ratio')
        if recursive.degenerate != ratio.degenerate:
            mismatched += 1
        elif not ratio.degenerate:
            palm_res = max(palm_res, max_abs(recursive.matrix.entries - ratio.matrix.entries))
        try:
            series = conditional_kernel_neumann(k, xi, window)
        except NotContractive:
            skipped_neumann += 1
        else:
            if series.regular == direct.regular:
                neumann_res = max(neumann_res, max_abs(series.matrix.entries - direct.matrix.entries))
            else:
                mismatched += 1
        if k.is_projection and direct.regular:
            subspace = projection_conditional_subspace(k, xi, window)
            subspace_res = max(subspace_res, max_abs(subspace.entries - direct.matrix.entries))

    details = {
        'neumann_residual': neumann_res,
        'palm_residual': palm_res,
        'subspace_residual': subspace_res,
        'neumann_skipped': skipped_neumann,
        'status_mismatches': mismatched,
        'degenerate_traces': degenerate,
        'degenerate_reasons': dict(sorted(reasons.items())),
        'traces': len(trace_list),
    }
    statistic = max(neumann_res, palm_res, subspace_res, float(mismatched > 0))
    return make_result('method_agreement', 'exact', statistic, exact_tolerance(tolerance), seed, details)


def check_limit_convergence(
    k: KernelMatrix,
    window: SiteSubset,
    exhaustion: Sequence[SiteSubset],
    x: Configuration | None = None,
    seed: int = 0,
    tolerance: float | None = None,
) -> CheckResult:
    """Stage distances along an exhaustion of W, for X sampled from P_K unless given.

    The statistic compares the final stage with conditioning in two steps,
    first on the previous stage and then on the rest of W.
    """

    x = sample_dpp(k, trial_generator(seed, 0)) if x is None else x
    final, trace = conditional_limit(k, x, window, exhaustion)
    stages = list(exhaustion)
    outside = window.complement()
    if len(stages) > 1:
        previous = conditional_kernel(k, x, stages[-2])
        remainder = SiteSubset(window.mask & ~stages[-2].mask)
        if previous.regular:
            nested = conditional_kernel(previous.matrix, x, remainder).matrix.entries
            statistic = trace_norm(compress(nested, outside, outside) - compress(final.matrix, outside, outside))
        else:
            statistic = 0.0 if not final.regular else 1.0
    else:
        statistic = 0.0
    curve = [dict(stage) for stage in trace.stages]
    details = {'configuration': list(x.indices), 'curve': curve, 'final_status': final.status}
    return make_result('limit_convergence', 'exact', statistic, exact_tolerance(tolerance), seed, details)
