"""Variance bound for conditional quadratic forms.

For phi vanishing on B, Var <K^{[X,B]} phi, phi> is at most
||phi||^2 ||chi_B K phi||^2. For projection kernels the dominating quantity
E ||(K^{[X,B]} - chi_{B^c} K chi_{B^c}) phi||^2 equals ||chi_B K phi||^2
exactly. A contraction is handled through its projection dilation, whose
conditional quadratic forms coincide with those of K trace by trace.
"""

from __future__ import annotations

import logging

import numpy as np

from dppcond.checks.base import ConditionalCache, CheckResult, exact_tolerance, make_result, traces
from dppcond.config import settings
from dppcond.errors import DimensionMismatch, SupportViolation
from dppcond.kernel.core import KernelMatrix, SiteSubset, _check_mask, compress, dilate_to_projection
from dppcond.types import Mode

logger = logging.getLogger(__name__)


def _norm2(v: np.ndarray) -> float:
    return float(np.real(np.vdot(v, v)))


def _dominating(cache: ConditionalCache, target: np.ndarray, phi: np.ndarray, trace_list) -> float:
    total = 0.0
    for xi, p in trace_list:
        total += p * _norm2((cache.get(xi).matrix.entries - target) @ phi)
    return total


def check_variance_bound(
    k: KernelMatrix,
    window: SiteSubset,
    phi: np.ndarray,
    mode: Mode = 'exact',
    trials: int = 1000,
    seed: int = 0,
    use_dilation: bool = True,
    tolerance: float | None = None,
) -> CheckResult:
    _check_mask(k.n, window)
    phi = np.asarray(phi)
    if phi.shape != (k.n,):
        raise DimensionMismatch(f'test vector of shape {phi.shape} for {k.n} sites')
    if np.any(phi[window.mask] != 0):
        raise SupportViolation('the test vector must vanish on the window')

    cache = ConditionalCache(k, window)
    trace_list = traces(k, window, mode, trials, seed)
    weights = np.array([p for _, p in trace_list])
    weights = weights / weights.sum()
    trace_list = [(xi, float(p)) for (xi, _), p in zip(trace_list, weights)]
    values = np.array([float(np.real(np.vdot(phi, cache.get(xi).matrix.entries @ phi))) for xi, _ in trace_list])

    kphi = k.entries @ phi
    bound = _norm2(phi) * _norm2(kphi[window.mask])
    mean = float(np.sum(weights * values))
    var = float(np.sum(weights * (values - mean) ** 2))
    details: dict = {'variance': var, 'bound': bound, 'mean': mean, 'traces': len(trace_list)}

    if mode == 'exact':
        excess = var - bound
        tol = exact_tolerance(tolerance)
        components = [max(excess, 0.0)]
        if k.is_projection:
            outside = window.complement()
            dominating = _dominating(cache, compress(k, outside, outside), phi, trace_list)
            residual = abs(dominating - _norm2(kphi[window.mask]))
            details['dominating_residual'] = residual
            components.append(residual)
    else:
        # standard error of the sample variance from the fourth central moment
        m4 = float(np.sum(weights * (values - mean) ** 4))
        sigma = float(np.sqrt(max(m4 - var * var, 0.0) / trials))
        excess = var - bound
        tol = settings.mc_sigmas * sigma + settings.exact_tol if tolerance is None else float(tolerance)
        components = [max(excess, 0.0)]
        details.update({'sigma': sigma, 'trials': trials})
    details['excess'] = excess

    if use_dilation:
        dilated = dilate_to_projection(k)
        wide = SiteSubset(np.concatenate([window.mask, np.zeros(k.n, dtype=bool)]))
        wide_phi = np.concatenate([phi, np.zeros(k.n, dtype=phi.dtype)])
        wide_cache = ConditionalCache(dilated, wide)
        agreement = 0.0
        for (xi, _), v in zip(trace_list, values):
            g = wide_cache.get(xi).matrix.entries
            agreement = max(agreement, abs(float(np.real(np.vdot(wide_phi, g @ wide_phi))) - v))
        outside = wide.complement()
        dominating = _dominating(wide_cache, compress(dilated, outside, outside), wide_phi, trace_list)
        kt_phi = dilated.entries @ wide_phi
        dilated_residual = abs(dominating - _norm2(kt_phi[wide.mask]))
        details.update({'dilation_agreement': agreement, 'dilated_dominating_residual': dilated_residual})
        components.append(agreement)
        if mode == 'exact':
            components.append(dilated_residual)

    statistic = max(components)
    return make_result('variance_bound', mode, statistic, tol, seed, details)
