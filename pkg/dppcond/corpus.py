"""Deterministic randomized kernel corpora.

A corpus spec lists kernel classes with counts and sizes::

    {"entries": [{"kind": "projection", "count": 10, "n": 8, "rank": [1, 4]},
                 {"kind": "eigenvalue=1", "count": 2, "n": [4, 6], "complex": true}]}

Kernel i of the corpus is drawn from its own counter stream of the corpus
seed, so regenerating with the same seed and spec reproduces every file.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt, ValidationError, field_validator

from dppcond.errors import ConfigError
from dppcond.kernel.core import KernelMatrix
from dppcond.kernel.factories import eigenvalue_one, near_one, random_contraction, random_diagonal, random_projection
from dppcond.kernel.io import load_kernel, save_kernel
from dppcond.sampling.rng import SEED_LIMIT, trial_generator
from dppcond.utils import dumps, read_json, write_text

logger = logging.getLogger(__name__)

Kind = Literal['projection', 'contraction', 'diagonal', 'eigenvalue_one', 'near_one']
_ALIASES = {'eigenvalue=1': 'eigenvalue_one', 'near-one': 'near_one', 'near_1': 'near_one'}

MANIFEST = 'manifest.json'


class CorpusEntry(BaseModel):
    model_config = ConfigDict(extra='forbid')

    kind: Kind
    count: NonNegativeInt = 1
    n: Union[PositiveInt, tuple[PositiveInt, PositiveInt]] = 6
    rank: Optional[Union[NonNegativeInt, tuple[NonNegativeInt, NonNegativeInt]]] = None
    complex: bool = False

    @field_validator('kind', mode='before')
    @classmethod
    def alias_kind(cls, value: Any):
        return _ALIASES.get(value, value) if isinstance(value, str) else value

    def draw_size(self, rng: np.random.Generator) -> int:
        if isinstance(self.n, tuple):
            lo, hi = sorted(self.n)
            return int(rng.integers(lo, hi + 1))
        return int(self.n)

    def draw_rank(self, n: int, rng: np.random.Generator) -> int:
        if self.rank is None:
            return int(rng.integers(1, n + 1))
        if isinstance(self.rank, tuple):
            lo, hi = sorted(self.rank)
            return min(n, int(rng.integers(lo, hi + 1)))
        return min(n, int(self.rank))


class CorpusSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    entries: list[CorpusEntry] = Field(default_factory=list)


DEFAULT_CORPUS = CorpusSpec(entries=[
    CorpusEntry(kind='projection', count=60, n=(2, 10)),
    CorpusEntry(kind='projection', count=20, n=(2, 8), complex=True),
    CorpusEntry(kind='contraction', count=60, n=(2, 10)),
    CorpusEntry(kind='contraction', count=20, n=(2, 8), complex=True),
    CorpusEntry(kind='diagonal', count=20, n=(2, 10)),
    CorpusEntry(kind='eigenvalue_one', count=10, n=(2, 10)),
    CorpusEntry(kind='near_one', count=10, n=(2, 10)),
])


def load_corpus_spec(path: str | Path) -> CorpusSpec:
    try:
        return CorpusSpec.model_validate(read_json(path))
    except ValidationError as e:
        raise ConfigError(f'invalid corpus spec: {e}') from e


def _build(entry: CorpusEntry, rng: np.random.Generator) -> KernelMatrix:
    n = entry.draw_size(rng)
    if entry.kind == 'projection':
        return random_projection(n, entry.draw_rank(n, rng), rng, entry.complex)
    if entry.kind == 'contraction':
        return random_contraction(n, rng, entry.complex)
    if entry.kind == 'diagonal':
        return random_diagonal(n, rng)
    if entry.kind == 'eigenvalue_one':
        return eigenvalue_one(n, rng, entry.complex)
    return near_one(n, rng, entry.complex)


def gen_corpus(seed: int, spec: CorpusSpec, out_dir: str | Path) -> list[dict[str, Any]]:
    """Write ``kernel_XXXX.json`` files and ``manifest.json``; returns the manifest rows."""

    if not 0 <= seed < SEED_LIMIT:
        raise ConfigError(f'seed {seed} outside [0, 2^64)')
    out = Path(out_dir)
    rows: list[dict[str, Any]] = []
    index = 0
    for entry in spec.entries:
        for _ in range(entry.count):
            kernel = _build(entry, trial_generator(seed, index))
            name = f'kernel_{index:04d}.json'
            save_kernel(kernel, out / name)
            rows.append({
                'kernel_id': f'kernel_{index:04d}',
                'file': name,
                'class': entry.kind,
                'n': kernel.n,
                'complex': kernel.is_complex,
                'is_projection': kernel.is_projection,
            })
            index += 1
    write_text(out / MANIFEST, dumps({'seed': seed, 'spec': spec.model_dump(), 'kernels': rows}))
    logger.info('wrote %d kernels to %s', len(rows), out)
    return rows


def load_manifest(corpus_dir: str | Path) -> list[tuple[str, KernelMatrix]]:
    """(kernel_id, kernel) for every manifest row, in manifest order."""
    corpus_dir = Path(corpus_dir)
    manifest = read_json(corpus_dir / MANIFEST)
    try:
        rows = manifest['kernels']
        return [(row['kernel_id'], load_kernel(corpus_dir / row['file'])) for row in rows]
    except (KeyError, TypeError) as e:
        raise ConfigError(f'malformed corpus manifest in {corpus_dir}: {e!r}') from e
