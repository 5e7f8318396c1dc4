"""Shared pieces of the verification checks: the result model and trace iteration."""

from __future__ import annotations

import logging
from collections import Counter
from typing import Any, Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dppcond.conditional.kernels import ConditionalKernel, conditional_kernel
from dppcond.config import settings
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset
from dppcond.sampling.oracle import window_distribution
from dppcond.sampling.sampler import sample_batch
from dppcond.types import Mode
from dppcond.utils import to_jsonable

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    check_id: str
    mode: Mode
    statistic: float
    tolerance: float
    passed: bool = Field(alias='pass')
    seed: int
    kernel_id: str = ''
    instance: int = 0
    details: dict[str, Any] = Field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True)


def make_result(
    check_id: str,
    mode: Mode,
    statistic: float,
    tolerance: float,
    seed: int = 0,
    details: dict[str, Any] | None = None,
) -> CheckResult:
    """Build a result whose pass flag is exactly ``statistic <= tolerance``."""
    statistic = float(statistic)
    tolerance = float(tolerance)
    return CheckResult(
        check_id=check_id,
        mode=mode,
        statistic=statistic,
        tolerance=tolerance,
        passed=bool(statistic <= tolerance),
        seed=int(seed),
        details=to_jsonable(details or {}),
    )


def exact_tolerance(tolerance: float | None) -> float:
    return settings.exact_tol if tolerance is None else float(tolerance)


class ConditionalCache:
    """Conditional kernels of one (K, B) pair keyed by the trace X intersected with B."""

    def __init__(self, kernel: KernelMatrix, window: SiteSubset):
        self.kernel = kernel
        self.window = window
        self._cache: dict[tuple[int, ...], ConditionalKernel] = {}

    def get(self, x: Configuration) -> ConditionalKernel:
        xi = x.restrict(self.window)
        ck = self._cache.get(xi.indices)
        if ck is None:
            ck = conditional_kernel(self.kernel, xi, self.window)
            self._cache[xi.indices] = ck
        return ck

    @property
    def degenerate_traces(self) -> list[tuple[int, ...]]:
        return [key for key, ck in self._cache.items() if not ck.regular]


def sampled_configurations(kernel: KernelMatrix, trials: int, seed: int) -> list[Configuration]:
    return list(sample_batch(kernel, trials, seed).configs)


def trace_counts(configs: Iterable[Configuration], window: SiteSubset) -> Counter:
    """How often each trace X intersected with the window occurs."""
    return Counter(c.restrict(window) for c in configs)


def traces(
    kernel: KernelMatrix, window: SiteSubset, mode: Mode, trials: int = 0, seed: int = 0
) -> list[tuple[Configuration, float]]:
    """Conditioning traces with their weights.

    Exact mode lists every trace of positive probability under the law of X
    intersected with the window; Monte Carlo mode lists the distinct sampled
    traces with their empirical frequencies.
    """

    if mode == 'exact':
        return window_distribution(kernel, window).support()
    counts = trace_counts(sampled_configurations(kernel, trials, seed), window)
    return sorted(((xi, c / trials) for xi, c in counts.items()), key=lambda item: item[0].indices)


def mean_and_sigma(values: np.ndarray, counts: np.ndarray | None = None) -> tuple[float, float]:
    """Sample mean and its standard error; ``counts`` are multiplicities of the values."""
    values = np.asarray(values, dtype=float)
    if not values.size:
        return 0.0, 0.0
    counts = np.ones_like(values) if counts is None else np.asarray(counts, dtype=float)
    n = float(counts.sum())
    mean = float(np.sum(counts * values) / n)
    if n < 2:
        return mean, 0.0
    var = float(np.sum(counts * (values - mean) ** 2)) / (n - 1)
    return mean, float(np.sqrt(var / n))
