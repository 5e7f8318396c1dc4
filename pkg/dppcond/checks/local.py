"""Local properties of conditional kernels.

With Q an orthogonal projection whose range avoids the window B, the
compressed kernel R = (Q + chi_B) K (Q + chi_B) has the same law inside B
as K, and its Palm, induced and conditional kernels are the Q-compressions
of those of K. Conditioning on two disjoint windows in turn equals
conditioning on their union.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from dppcond.checks.base import ConditionalCache, CheckResult, exact_tolerance, make_result, traces
from dppcond.conditional.kernels import conditional_kernel, induced_kernel
from dppcond.conditional.palm import palm_many
from dppcond.config import settings
from dppcond.errors import DimensionMismatch, IndexOutOfRange, InvalidProjection, RangeNotDisjoint, WindowsOverlap
from dppcond.kernel.core import KernelMatrix, SiteSubset, _check_mask, validate_kernel
from dppcond.sampling.oracle import gap_probability
from dppcond.types import Mode
from dppcond.utils import max_abs

logger = logging.getLogger(__name__)

_PROJECTION_TOL = 1e-10


def compressed_kernel(k: KernelMatrix, window: SiteSubset, q: np.ndarray) -> KernelMatrix:
    """R = (Q + chi_B) K (Q + chi_B) after checking Q is a projection with chi_B Q = 0."""

    q = np.asarray(q)
    if q.shape != (k.n, k.n):
        raise DimensionMismatch(f'Q has shape {q.shape} for {k.n} sites')
    if max_abs(q - q.conj().T) > _PROJECTION_TOL or max_abs(q @ q - q) > _PROJECTION_TOL:
        raise InvalidProjection('Q is not an orthogonal projection')
    if max_abs(q[window.mask, :]) > _PROJECTION_TOL:
        raise RangeNotDisjoint('the range of Q meets the window coordinates')
    p = q + np.diag(window.mask.astype(float))
    return validate_kernel(p @ k.entries @ p, k.hermitian_tol, k.spectral_tol, ground=k.ground)


def check_local_identities(
    k: KernelMatrix,
    window: SiteSubset,
    q: np.ndarray,
    points: Sequence[int] = (),
    mode: Mode = 'exact',
    trials: int = 1000,
    seed: int = 0,
    tolerance: float | None = None,
) -> CheckResult:
    """Max-norm residuals of the Palm, resolvent and conditional compression identities."""

    _check_mask(k.n, window)
    if any(p not in window for p in points):
        raise IndexOutOfRange(f'Palm points {list(points)} must lie in the window')
    r = compressed_kernel(k, window, q)
    q = np.asarray(q)
    p = q + np.diag(window.mask.astype(float))
    details: dict = {}

    palm_k = palm_many(k, points)
    palm_r = palm_many(r, points)
    if palm_k.degenerate != palm_r.degenerate:
        palm_res = 1.0
    else:
        palm_res = max_abs(palm_r.matrix.entries - p @ palm_k.matrix.entries @ p)
    details['palm_residual'] = palm_res

    if gap_probability(k, window) > settings.gap_tol:
        induced_k = induced_kernel(k, window).matrix.entries
        induced_r = induced_kernel(r, window).matrix.entries
        resolvent_res = max_abs(induced_r - q @ induced_k @ q)
        details['resolvent_branch'] = 'checked'
    else:
        resolvent_res = 0.0
        details['resolvent_branch'] = 'skipped: zero gap probability'
    details['resolvent_residual'] = resolvent_res

    cache_k = ConditionalCache(k, window)
    cache_r = ConditionalCache(r, window)
    conditional_res = corner_res = 0.0
    trace_list = traces(k, window, mode, trials, seed)
    for xi, _ in trace_list:
        ck, cr = cache_k.get(xi), cache_r.get(xi)
        if ck.regular != cr.regular:
            conditional_res = max(conditional_res, 1.0)
            continue
        qkq = q @ ck.matrix.entries @ q
        conditional_res = max(conditional_res, max_abs(cr.matrix.entries - qkq))
        corner_res = max(corner_res, max_abs(p @ ck.matrix.entries @ p - qkq))
    details.update({'conditional_residual': conditional_res, 'corner_residual': corner_res, 'traces': len(trace_list)})

    statistic = max(palm_res, resolvent_res, conditional_res, corner_res)
    return make_result('local_identities', mode, statistic, exact_tolerance(tolerance), seed, details)


def check_two_window_commutation(
    k: KernelMatrix,
    first: SiteSubset,
    second: SiteSubset,
    mode: Mode = 'exact',
    trials: int = 1000,
    seed: int = 0,
    tolerance: float | None = None,
) -> CheckResult:
    """(K^{[X,A]})^{[X,B]} against K^{[X, A cup B]}, in both orders."""

    _check_mask(k.n, first, second)
    if not first.isdisjoint(second):
        raise WindowsOverlap(f'{first} and {second} share sites')
    union = first.union(second)
    residual = swapped = 0.0
    degenerate = 0
    trace_list = traces(k, union, mode, trials, seed)
    for xi, _ in trace_list:
        joint = conditional_kernel(k, xi, union)
        for a, b, name in ((first, second, 'ab'), (second, first, 'ba')):
            inner = conditional_kernel(k, xi, a)
            if not inner.regular:
                degenerate += 1
                continue
            nested = conditional_kernel(inner.matrix, xi, b)
            value = max_abs(nested.matrix.entries - joint.matrix.entries)
            if name == 'ab':
                residual = max(residual, value)
            else:
                swapped = max(swapped, value)
    details = {'residual': residual, 'swapped_residual': swapped, 'traces': len(trace_list), 'degenerate': degenerate}
    statistic = max(residual, swapped)
    return make_result('two_window_commutation', mode, statistic, exact_tolerance(tolerance), seed, details)
