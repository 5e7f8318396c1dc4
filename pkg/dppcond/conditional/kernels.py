"""Canonical conditional kernels K^{[X,B]} and their constructions.

K^{[X,B]} is the kernel of the process on the complement of B given that
the configuration inside B equals X intersected with B. It is the Palm
kernel at X intersected with B followed by the resolvent compression
chi_{B^c} L (1 - chi_B L)^{-1} chi_{B^c}, and the zero kernel when either
step is singular.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import pairwise
from typing import Any, Sequence

import numpy as np
import scipy.linalg as sla

from dppcond.config import settings
from dppcond.errors import ExhaustionNotNested, KernelError, NotAProjection, NotContractive, ZeroGapProbability
from dppcond.kernel.core import (
    Configuration,
    KernelMatrix,
    SiteSubset,
    _check_mask,
    compress,
    validate_kernel,
    zero_kernel,
)
from dppcond.conditional.palm import palm_many
from dppcond.sampling.oracle import gap_probability
from dppcond.types import StageRecord, Status
from dppcond.utils import op_norm, trace_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConditionalKernel:
    base: KernelMatrix
    window: SiteSubset
    trace_config: Configuration
    matrix: KernelMatrix
    status: Status
    # 1 - lambda_max(chi_B L chi_B): smallest singular value of the B-block of 1 - chi_B L
    certificate: float = 1.0
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def regular(self) -> bool:
        return self.status == 'regular'


@dataclass(frozen=True)
class ConvergenceTrace:
    stages: tuple[StageRecord, ...]

    @property
    def trace_distances(self) -> list[float]:
        return [s['trace_distance'] for s in self.stages]

    @property
    def operator_distances(self) -> list[float]:
        return [s['operator_distance'] for s in self.stages]


def _degenerate(k: KernelMatrix, window: SiteSubset, xi: Configuration, certificate: float, reason: str) -> ConditionalKernel:
    logger.debug('degenerate conditional kernel at trace %s (%s, certificate %.3e)', xi.indices, reason, certificate)
    return ConditionalKernel(k, window, xi, zero_kernel(k), 'degenerate', certificate, {'reason': reason})


def _palm_block(k: KernelMatrix, x: Configuration, window: SiteSubset):
    _check_mask(k.n, window)
    xi = x.restrict(window)
    palm = palm_many(k, xi.indices, method='det_ratio')
    return xi, palm


def _certificate(l_bb: np.ndarray) -> float:
    if not l_bb.size:
        return 1.0
    return float(1.0 - np.linalg.eigvalsh(l_bb)[-1])


def _package(k: KernelMatrix, window: SiteSubset, xi: Configuration, m: np.ndarray, certificate: float,
             meta: dict[str, Any]) -> ConditionalKernel:
    try:
        matrix = validate_kernel(m, k.hermitian_tol, k.spectral_tol, ground=k.ground, support=window.complement())
    except KernelError as e:
        logger.warning('conditional kernel at trace %s rejected by validation (%s)', xi.indices, e)
        return _degenerate(k, window, xi, certificate, 'validation')
    return ConditionalKernel(k, window, xi, matrix, 'regular', certificate, meta)


def conditional_kernel(k: KernelMatrix, x: Configuration, window: SiteSubset) -> ConditionalKernel:
    """K^{[X,B]} by a direct solve on the B-block.

    Only X intersected with B is read. The result is supported on B^c
    exactly; a singular Palm step or resolvent gives the zero kernel with
    status ``degenerate``.
    """

    xi, palm = _palm_block(k, x, window)
    if palm.degenerate:
        return _degenerate(k, window, xi, 0.0, f'palm_{palm.reason}')
    l = palm.matrix.entries
    b = window.indices
    c = window.complement().indices
    l_bb = l[np.ix_(b, b)]
    certificate = _certificate(l_bb)
    if certificate <= settings.sv_tol * palm.matrix.scale:
        return _degenerate(k, window, xi, certificate, 'resolvent')
    m = np.zeros_like(l)
    cc = np.ix_(c, c)
    if b.size:
        eye = np.eye(b.size, dtype=l.dtype)
        solved = sla.solve(eye - l_bb, l[np.ix_(b, c)], assume_a='pos', check_finite=False)
        m[cc] = l[cc] + l[np.ix_(c, b)] @ solved
    else:
        m[cc] = l[cc]
    meta = {'method': 'direct', 'palm_min_pivot': palm.min_pivot}
    return _package(k, window, xi, m, certificate, meta)


def conditional_kernel_neumann(
    k: KernelMatrix, x: Configuration, window: SiteSubset, series_tol: float | None = None
) -> ConditionalKernel:
    """K^{[X,B]} from the series chi_{B^c} sum_m L (chi_B L)^m chi_{B^c}.

    Terms are added until one has operator norm below ``series_tol``.
    """

    tol = settings.series_tol if series_tol is None else series_tol
    xi, palm = _palm_block(k, x, window)
    if palm.degenerate:
        return _degenerate(k, window, xi, 0.0, f'palm_{palm.reason}')
    l = palm.matrix.entries
    step = compress(l, window, SiteSubset.full(k.n))
    norm = op_norm(step)
    if norm >= 1.0 - settings.sv_tol:
        raise NotContractive(f'||chi_B L|| = {norm:.15f} is not below 1')
    term = l
    total = np.array(l, copy=True)
    terms = 0
    while op_norm(term) >= tol:
        if terms >= settings.series_max_terms:
            raise NotContractive(f'series not below {tol:.1e} after {terms} terms')
        term = term @ step
        total += term
        terms += 1
    certificate = _certificate(l[np.ix_(window.indices, window.indices)])
    meta = {'method': 'neumann', 'terms': terms, 'step_norm': norm, 'palm_min_pivot': palm.min_pivot}
    return _package(k, window, xi, compress(total, window.complement(), window.complement()), certificate, meta)


def induced_kernel(k: KernelMatrix, window: SiteSubset) -> ConditionalKernel:
    """chi_{B^c} K (1 - chi_B K)^{-1} chi_{B^c}: the kernel given no particle in B."""
    gap = gap_probability(k, window)
    if gap <= settings.gap_tol:
        raise ZeroGapProbability(f'det(1 - chi_B K chi_B) = {gap:.3e}')
    return conditional_kernel(k, Configuration(), window)


def conditional_limit(
    k: KernelMatrix, x: Configuration, window: SiteSubset, exhaustion: Sequence[SiteSubset]
) -> tuple[ConditionalKernel, ConvergenceTrace]:
    """Stage-by-stage approximation of K^{[X,W]} along an increasing exhaustion of W.

    Each stage kernel is compressed to the complement of W and compared with
    the final stage in trace norm and operator norm.
    """

    stages = list(exhaustion)
    if not stages:
        raise ExhaustionNotNested('exhaustion is empty')
    _check_mask(k.n, window, *stages)
    for inner, outer in pairwise(stages):
        if not inner.issubset(outer):
            raise ExhaustionNotNested(f'{inner} is not contained in {outer}')
    if stages[-1] != window:
        raise ExhaustionNotNested(f'last stage {stages[-1]} does not equal the window {window}')

    outside = window.complement()
    kernels = [conditional_kernel(k, x, stage) for stage in stages]
    compressed = [compress(ck.matrix, outside, outside) for ck in kernels]
    final = compressed[-1]
    records = tuple(
        StageRecord(
            window_size=stage.size,
            trace_distance=trace_norm(m - final),
            operator_distance=op_norm(m - final),
        )
        for stage, m in zip(stages, compressed)
    )
    return kernels[-1], ConvergenceTrace(records)


def projection_conditional_subspace(
    k: KernelMatrix, x: Configuration, window: SiteSubset, rank_tol: float | None = None
) -> KernelMatrix:
    """Projection onto the closure of chi_{B^c} H(X cap B) for a projection kernel.

    H(X cap B) is the subspace of Ran K vanishing at every point of X inside
    the window.
    """

    if not k.is_projection:
        raise NotAProjection('the subspace construction needs a projection kernel')
    tol = settings.rank_tol if rank_tol is None else rank_tol
    _check_mask(k.n, window)
    xi = x.restrict(window)
    w, v = k.spectrum
    basis = v[:, w > 0.5]
    if xi.indices and basis.shape[1]:
        basis = basis @ sla.null_space(basis[list(xi.indices), :], rcond=tol)
    restricted = basis * window.complement().mask[:, None]
    q = sla.orth(restricted, rcond=tol) if restricted.shape[1] else restricted
    return validate_kernel(
        q @ q.conj().T, k.hermitian_tol, k.spectral_tol, ground=k.ground, support=window.complement()
    )
