"""Palm kernels K^{p_1,...,p_n}."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from dppcond.config import settings
from dppcond.errors import DuplicatePoint, IndexOutOfRange, KernelError
from dppcond.kernel.core import KernelMatrix, SiteSubset, validate_kernel, zero_kernel
from dppcond.types import PalmMethod

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PalmKernel:
    base: KernelMatrix
    points: tuple[int, ...]
    matrix: KernelMatrix
    degenerate: bool
    # smallest Cholesky pivot of [K(p_i, p_j)] relative to max|K|
    min_pivot: float = 1.0
    # why a degenerate kernel is zero: "pivot" or "validation"
    reason: str | None = None


def _points(k: KernelMatrix, points: Sequence[int]) -> tuple[int, ...]:
    pts = tuple(int(p) for p in points)
    if len(set(pts)) != len(pts):
        raise DuplicatePoint(f'repeated Palm point in {pts}')
    for p in pts:
        if not 0 <= p < k.n:
            raise IndexOutOfRange(f'site {p} outside [0, {k.n})')
    return pts


def _finish(k: KernelMatrix, pts: tuple[int, ...], m: np.ndarray, min_pivot: float) -> PalmKernel:
    off = SiteSubset.of(pts, k.n).complement()
    try:
        matrix = validate_kernel(m, k.hermitian_tol, k.spectral_tol, ground=k.ground, support=off)
    except KernelError as e:
        # a pivot just above threshold can amplify round-off past the spectral window
        logger.warning('Palm kernel at %s rejected by validation (%s); treating as degenerate', pts, e)
        return _degenerate(k, pts, min_pivot, 'validation')
    return PalmKernel(k, pts, matrix, False, min_pivot)


def _degenerate(k: KernelMatrix, pts: tuple[int, ...], min_pivot: float, reason: str = 'pivot') -> PalmKernel:
    logger.debug('degenerate Palm kernel at %s (%s, relative pivot %.3e)', pts, reason, min_pivot)
    return PalmKernel(k, pts, zero_kernel(k), True, min_pivot, reason)


def palm_one(k: KernelMatrix, p: int) -> PalmKernel:
    """K(x, y) - K(x, p) K(p, y) / K(p, p), or the zero kernel when K(p, p) vanishes."""

    (p,) = _points(k, [p])
    scale = k.scale
    d = float(np.real(k.entries[p, p]))
    if d <= settings.diag_tol * scale:
        return _degenerate(k, (p,), d / scale)
    m = k.entries - np.outer(k.entries[:, p], k.entries[p, :]) / d
    return _finish(k, (p,), m, d / scale)


def _recursive(k: KernelMatrix, pts: tuple[int, ...]) -> PalmKernel:
    scale = k.scale
    m = np.array(k.entries, copy=True)
    min_pivot = np.inf
    for p in pts:
        d = float(np.real(m[p, p]))
        min_pivot = min(min_pivot, d / scale)
        if d <= settings.diag_tol * scale:
            return _degenerate(k, pts, min_pivot)
        m = m - np.outer(m[:, p], m[p, :]) / d
        m[p, :] = 0
        m[:, p] = 0
    return _finish(k, pts, m, float(min_pivot))


def _det_ratio(k: KernelMatrix, pts: tuple[int, ...]) -> PalmKernel:
    # The Cholesky pivots of [K(p_i, p_j)] are the diagonal pivots of the
    # recursive route, so both methods share one degeneracy test.
    scale = k.scale
    idx = list(pts)
    block = k.entries[np.ix_(idx, idx)]
    try:
        factor = sla.cho_factor(block, lower=True, check_finite=False)
    except sla.LinAlgError:
        return _degenerate(k, pts, 0.0)
    pivots = np.real(np.diagonal(factor[0])) ** 2
    min_pivot = float(pivots.min()) / scale
    if min_pivot <= settings.diag_tol:
        return _degenerate(k, pts, min_pivot)
    m = k.entries - k.entries[:, idx] @ sla.cho_solve(factor, k.entries[idx, :], check_finite=False)
    return _finish(k, pts, m, min_pivot)


def palm_many(k: KernelMatrix, points: Sequence[int], method: PalmMethod = 'det_ratio') -> PalmKernel:
    """Palm kernel at several distinct points.

    ``recursive`` iterates ``palm_one``; ``det_ratio`` takes the Schur
    complement of the conditioning block through its Cholesky factor.
    """

    pts = _points(k, points)
    if not pts:
        return PalmKernel(k, (), k, False, 1.0)
    if method == 'recursive':
        return _recursive(k, pts)
    if method == 'det_ratio':
        return _det_ratio(k, pts)
    raise ValueError(f'unknown Palm method {method!r}')
