"""Check registry: resolves per-check parameters for a kernel and runs one job.

Parameters come from the experiment config as plain JSON values. Windows
accept index lists or the shorthands ``"first:k"``, ``"last:k"``,
``"random:k"``, ``"all"`` and ``"none"``; vectors accept a list of numbers
or ``"random"``. Anything left out gets a default sized to the kernel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from dppcond.checks.base import CheckResult, make_result
from dppcond.checks.completeness import check_completeness
from dppcond.checks.consistency import (
    check_dilation,
    check_limit_convergence,
    check_method_agreement,
    check_sampler_agreement,
)
from dppcond.checks.local import check_local_identities, check_two_window_commutation
from dppcond.checks.martingale import check_martingale_sequence, check_one_step_martingale
from dppcond.checks.measure import check_measure_consistency
from dppcond.checks.tail import check_tail_mixing
from dppcond.checks.variance import check_variance_bound
from dppcond.config import settings
from dppcond.errors import ConfigError, DppError, IndexOutOfRange, ParseError
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset, dilate_to_projection
from dppcond.kernel.factories import random_projection_avoiding
from dppcond.sampling.rng import derive_seed, trial_generator
from dppcond.types import Mode

logger = logging.getLogger(__name__)

Params = dict[str, Any]


def resolve_window(
    spec: Any, n: int, rng: np.random.Generator, available: SiteSubset | None = None
) -> SiteSubset:
    """Turn a window parameter into a mask, drawing only from ``available`` sites."""

    pool = np.arange(n) if available is None else available.indices
    if isinstance(spec, SiteSubset):
        return spec
    if isinstance(spec, (list, tuple)):
        return SiteSubset.of(spec, n)
    if not isinstance(spec, str):
        raise ParseError(f'cannot read a window from {spec!r}')
    if spec == 'all':
        return SiteSubset.of(pool, n)
    if spec == 'none':
        return SiteSubset.empty(n)
    kind, _, count = spec.partition(':')
    try:
        k = int(count)
    except ValueError:
        raise ParseError(f'bad window shorthand {spec!r}') from None
    if not 0 <= k <= pool.size:
        raise IndexOutOfRange(f'window {spec!r} asks for {k} of {pool.size} available sites')
    if kind == 'first':
        return SiteSubset.of(pool[:k], n)
    if kind == 'last':
        return SiteSubset.of(pool[pool.size - k:], n)
    if kind == 'random':
        return SiteSubset.of(np.sort(rng.choice(pool, size=k, replace=False)), n)
    raise ParseError(f'unknown window shorthand {spec!r}')


def resolve_vector(spec: Any, k: KernelMatrix, support: SiteSubset, rng: np.random.Generator) -> np.ndarray:
    """A test vector supported on ``support``; random Gaussian entries unless given."""

    if spec is None or spec == 'random':
        v = rng.standard_normal(k.n)
        if k.is_complex:
            v = v + 1j * rng.standard_normal(k.n)
        return np.where(support.mask, v, 0)
    v = np.asarray(spec)
    if v.ndim == 2 and v.shape[-1] == 2:
        v = v[:, 0] + 1j * v[:, 1]
    return v


def _size(n: int, fraction: float, minimum: int = 1) -> int:
    return min(n, max(minimum, int(n * fraction)))


def _one_step(k, params, mode, trials, seed, tolerance, rng):
    window = resolve_window(params.get('window', f'random:{_size(k.n, 1 / 3)}'), k.n, rng)
    return check_one_step_martingale(k, window, mode, trials, seed, tolerance)


def _prefix_stages(order: np.ndarray, stages: int, n: int) -> list[SiteSubset]:
    sizes = sorted({max(1, round(j * order.size / stages)) for j in range(1, stages + 1)}) if order.size else []
    return [SiteSubset.of(order[:s], n) for s in sizes]


def _martingale_sequence(k, params, mode, trials, seed, tolerance, rng):
    outer = resolve_window(params.get('outer', f'random:{_size(k.n, 2 / 3)}'), k.n, rng)
    if 'windows' in params:
        windows = [resolve_window(w, k.n, rng) for w in params['windows']]
    else:
        windows = _prefix_stages(rng.permutation(outer.indices), int(params.get('stages', 3)), k.n)
    phi = resolve_vector(params.get('phi'), k, outer.complement(), rng)
    g = params.get('g')
    return check_martingale_sequence(k, windows, outer, phi, g, tolerance, seed)


def _local(k, params, mode, trials, seed, tolerance, rng):
    window = resolve_window(params.get('window', f'first:{_size(k.n, 1 / 2)}'), k.n, rng)
    if 'q' in params:
        q = np.asarray(params['q'])
    else:
        q = random_projection_avoiding(window, int(params.get('q_rank', 1)), rng, k.is_complex)
    if 'points' in params:
        points = [int(p) for p in params['points']]
    elif window.size:
        diag = np.real(np.diagonal(k.entries))[window.indices]
        points = [int(window.indices[np.argmax(diag)])]
    else:
        points = []
    return check_local_identities(k, window, q, points, mode, trials, seed, tolerance)


def _two_window(k, params, mode, trials, seed, tolerance, rng):
    first = resolve_window(params.get('first', 'first:1'), k.n, rng)
    rest = first.complement()
    second = resolve_window(params.get('second', f'random:{min(rest.size, max(1, k.n // 3))}'), k.n, rng, rest)
    return check_two_window_commutation(k, first, second, mode, trials, seed, tolerance)


def _variance(k, params, mode, trials, seed, tolerance, rng):
    window = resolve_window(params.get('window', f'first:{_size(k.n, 1 / 2)}'), k.n, rng)
    phi = resolve_vector(params.get('phi'), k, window.complement(), rng)
    use_dilation = bool(params.get('use_dilation', True))
    return check_variance_bound(k, window, phi, mode, trials, seed, use_dilation, tolerance)


def _completeness(k, params, mode, trials, seed, tolerance, rng):
    details = {}
    if not k.is_projection:
        logger.info('completeness on a non-projection kernel runs on its projection dilation')
        k = dilate_to_projection(k)
        details['dilated'] = True
    if mode == 'exact' and k.n > settings.enumeration_cap:
        logger.warning(
            'completeness needs %d-site enumeration, over the cap of %d; sampling instead', k.n, settings.enumeration_cap
        )
        mode = 'mc'
        details['requested_mode'] = 'exact'
    window = resolve_window(params['window'], k.n, rng) if 'window' in params else None
    result = check_completeness(k, trials, seed, mode, window, tolerance)
    if details:
        result = result.model_copy(update={'details': {**result.details, **details}})
    return result


def _tail(k, params, mode, trials, seed, tolerance, rng):
    head = resolve_window(params.get('head', f'first:{_size(k.n, 1 / 8)}'), k.n, rng)
    rest = k.n - head.size
    depths = params.get('depths') or sorted({j * rest // 4 for j in range(1, 5)})
    threshold = float(params.get('threshold', 0.01) if tolerance is None else tolerance)
    return check_tail_mixing(k, head, depths, mode, trials, seed, threshold)


def _measure(k, params, mode, trials, seed, tolerance, rng):
    window = resolve_window(params.get('window', f'first:{_size(k.n, 1 / 3)}'), k.n, rng)
    first = resolve_window(params.get('first', f'random:{_size(k.n, 1 / 4)}'), k.n, rng)
    rest = first.complement()
    second = resolve_window(params.get('second', f'random:{min(rest.size, _size(k.n, 1 / 4))}'), k.n, rng, rest)
    return check_measure_consistency(k, window, first, second, tolerance, seed)


def _dilation(k, params, mode, trials, seed, tolerance, rng):
    return check_dilation(k, tolerance, seed)


def _sampler(k, params, mode, trials, seed, tolerance, rng):
    return check_sampler_agreement(k, trials, seed, tolerance)


def _methods(k, params, mode, trials, seed, tolerance, rng):
    window = resolve_window(params.get('window', f'random:{_size(k.n, 1 / 3)}'), k.n, rng)
    return check_method_agreement(k, window, tolerance, seed)


def _limit(k, params, mode, trials, seed, tolerance, rng):
    window = resolve_window(params.get('window', f'first:{_size(k.n, 1 / 2)}'), k.n, rng)
    if 'exhaustion' in params:
        stages = [resolve_window(w, k.n, rng) for w in params['exhaustion']]
    else:
        stages = _prefix_stages(window.indices, int(params.get('stages', 4)), k.n)
    x = Configuration.of(params['x']) if 'x' in params else None
    return check_limit_convergence(k, window, stages, x, seed, tolerance)


@dataclass(frozen=True)
class CheckSpec:
    check_id: str
    modes: tuple[Mode, ...]
    run: Callable[..., CheckResult]


REGISTRY: dict[str, CheckSpec] = {
    spec.check_id: spec
    for spec in (
        CheckSpec('one_step_martingale', ('exact', 'mc'), _one_step),
        CheckSpec('martingale_sequence', ('exact',), _martingale_sequence),
        CheckSpec('local_identities', ('exact', 'mc'), _local),
        CheckSpec('two_window_commutation', ('exact', 'mc'), _two_window),
        CheckSpec('variance_bound', ('exact', 'mc'), _variance),
        CheckSpec('completeness', ('exact', 'mc'), _completeness),
        CheckSpec('tail_mixing', ('exact', 'mc'), _tail),
        CheckSpec('measure_consistency', ('exact',), _measure),
        CheckSpec('dilation', ('exact',), _dilation),
        CheckSpec('sampler_agreement', ('mc',), _sampler),
        CheckSpec('method_agreement', ('exact',), _methods),
        CheckSpec('limit_convergence', ('exact',), _limit),
    )
}


def canonical_check_id(name: str) -> str:
    """Registry id for ``name``; a leading ``check_`` is accepted."""
    check_id = name.removeprefix('check_')
    if check_id not in REGISTRY:
        raise ConfigError(f'unknown check {name!r}; known: {sorted(REGISTRY)}')
    return check_id


def job_modes(check_id: str, requested: str) -> list[Mode]:
    """Modes to run for a request; unsupported modes fall back to the supported one."""

    supported = REGISTRY[check_id].modes
    wanted = ['exact', 'mc'] if requested == 'both' else [requested]
    modes = [m for m in wanted if m in supported]
    if not modes:
        logger.warning('%s does not run in %s mode; using %s', check_id, requested, supported[0])
        modes = [supported[0]]
    return modes


@dataclass
class CheckJob:
    check_id: str
    kernel: KernelMatrix
    kernel_id: str
    instance: int
    mode: Mode
    trials: int
    seed: int
    params: Params = field(default_factory=dict)
    tolerance: float | None = None


def job_seed(master_seed: int, check_id: str, instance: int, mode: str) -> int:
    return derive_seed(master_seed, check_id, instance, mode)


def run_job(job: CheckJob) -> tuple[CheckResult, int]:
    """Run one job; returns the result and its exit-code priority (0 pass, 1 fail, 2 config, 3 breakdown)."""

    spec = REGISTRY[job.check_id]
    rng = trial_generator(derive_seed(job.seed, 'params'), 0)
    try:
        result = spec.run(job.kernel, dict(job.params), job.mode, job.trials, job.seed, job.tolerance, rng)
        code = 0 if result.passed else 1
    except DppError as e:
        logger.error('%s on %s aborted: %s', job.check_id, job.kernel_id or job.instance, e)
        details = {'error': type(e).__name__, 'message': str(e)}
        result = make_result(job.check_id, job.mode, float('inf'), 0.0, job.seed, details)
        code = e.exit_code
    except np.linalg.LinAlgError as e:
        logger.error('%s on %s broke down: %s', job.check_id, job.kernel_id or job.instance, e)
        details = {'error': 'NumericalBreakdown', 'message': str(e)}
        result = make_result(job.check_id, job.mode, float('inf'), 0.0, job.seed, details)
        code = 3
    return result.model_copy(update={'kernel_id': job.kernel_id, 'instance': job.instance}), code
