"""Exact spectral sampling of determinantal processes."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from dppcond.config import settings
from dppcond.conditional.kernels import conditional_kernel
from dppcond.errors import DegenerateKernel, NumericalBreakdown, ParseError
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset
from dppcond.sampling.rng import as_generator, trial_generator
from dppcond.utils import read_text, write_text

logger = logging.getLogger(__name__)

_SUM_TOL = 1e-6


@dataclass(frozen=True)
class SampleBatch:
    seed: int
    configs: tuple[Configuration, ...]
    kernel_id: str = ''

    def to_jsonl(self) -> str:
        header = json.dumps({'seed': self.seed, 'kernel_id': self.kernel_id, 'trials': len(self.configs)})
        lines = [json.dumps(list(c.indices)) for c in self.configs]
        return '\n'.join([header, *lines]) + '\n'

    @classmethod
    def from_jsonl(cls, text: str) -> SampleBatch:
        try:
            rows = [json.loads(line) for line in text.splitlines() if line.strip()]
            header, body = rows[0], rows[1:]
            return cls(int(header['seed']), tuple(Configuration.of(r) for r in body), str(header.get('kernel_id', '')))
        except (IndexError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f'malformed sample batch: {e}') from e

    def save(self, path: str | Path) -> Path:
        return write_text(path, self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> SampleBatch:
        return cls.from_jsonl(read_text(path))


def _sample_projection(v: np.ndarray, rng: np.random.Generator) -> Configuration:
    """Sequential sampling from the projection onto the columns of ``v`` (orthonormal)."""

    chosen: list[int] = []
    tol = settings.sampler_breakdown_tol
    while v.shape[1]:
        r = v.shape[1]
        intensity = np.sum(np.abs(v) ** 2, axis=1)
        if abs(intensity.sum() - r) > _SUM_TOL * r:
            raise NumericalBreakdown(f'conditional intensities sum to {intensity.sum():.12g}, expected {r}')
        if chosen and intensity[chosen].max() > tol:
            raise NumericalBreakdown(f'selected site keeps intensity {intensity[chosen].max():.3e}')
        cumulative = np.cumsum(intensity)
        i = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
        i = min(i, v.shape[0] - 1)
        chosen.append(i)
        j = int(np.argmax(np.abs(v[i, :])))
        pivot = v[:, j]
        v = np.delete(v, j, axis=1)
        if v.shape[1]:
            v = v - np.outer(pivot, v[i, :] / pivot[i])
            v, _ = np.linalg.qr(v)
    return Configuration.of(chosen)


def sample_dpp(k: KernelMatrix, rng_seed: Any = None) -> Configuration:
    """One exact sample from P_K (Bernoulli eigenvector selection, then sequential placement)."""
    rng = as_generator(rng_seed)
    w, v = k.spectrum
    if not w.size:
        return Configuration()
    keep = rng.random(w.shape[0]) < np.clip(w, 0.0, 1.0)
    return _sample_projection(v[:, keep], rng)


def sample_batch(k: KernelMatrix, trials: int, master_seed: int, kernel_id: str = '') -> SampleBatch:
    """``trials`` samples, trial t drawn from its own counter stream."""

    k.spectrum  # decompose once before the workers share the kernel
    workers = max(1, min(settings.threads, trials))

    def block(start: int, stop: int) -> list[Configuration]:
        return [sample_dpp(k, trial_generator(master_seed, t)) for t in range(start, stop)]

    bounds = np.linspace(0, trials, workers + 1).astype(int)
    if workers == 1:
        configs = block(0, trials)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(block, bounds[:-1], bounds[1:])
            configs = [c for part in parts for c in part]
    return SampleBatch(int(master_seed), tuple(configs), kernel_id)


def sample_conditional(k: KernelMatrix, x: Configuration, window: SiteSubset, rng_seed: Any = None) -> Configuration:
    """Sample of the process on B^c given X intersected with B."""
    ck = conditional_kernel(k, x, window)
    if not ck.regular:
        raise DegenerateKernel(f'conditional kernel at trace {ck.trace_config.indices} is degenerate')
    return sample_dpp(ck.matrix, rng_seed)
