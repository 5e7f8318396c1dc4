"""Experiment configuration for ``cli.py run``.

Example::

    {
      "schema": 1,
      "kernel": "uniform_rank1(n=2)",
      "checks": ["one_step_martingale",
                 {"id": "tail_mixing", "params": {"head": "first:2", "depths": [2, 4, 6]}}],
      "mode": "exact",
      "trials": 1000,
      "seed": 7,
      "tolerances": {"exact_tol": 1e-9},
      "output_dir": "out"
    }
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, field_validator, model_validator

from dppcond.checks.registry import REGISTRY, canonical_check_id, job_modes
from dppcond.config import Settings
from dppcond.errors import ConfigError
from dppcond.kernel.factories import FACTORIES
from dppcond.sampling.rng import SEED_LIMIT
from dppcond.types import Mode, ModeRequest
from dppcond.utils import parse_call, read_json

logger = logging.getLogger(__name__)


class KernelSource(BaseModel):
    model_config = ConfigDict(extra='forbid')

    path: Optional[str] = None
    factory: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)
    corpus: Optional[str] = None

    @model_validator(mode='before')
    @classmethod
    def parse_call_form(cls, value: Any):
        if isinstance(value, str):
            if '(' in value or value in FACTORIES:
                name, params = parse_call(value) if '(' in value else (value, {})
                return {'factory': name, 'params': params}
            return {'path': value}
        return value

    @model_validator(mode='after')
    def exactly_one(self):
        given = [name for name in ('path', 'factory', 'corpus') if getattr(self, name) is not None]
        if len(given) != 1:
            raise ValueError(f'kernel source needs exactly one of path, factory, corpus (got {given or "none"})')
        if self.factory is not None and self.factory not in FACTORIES:
            raise ValueError(f'unknown kernel factory {self.factory!r}')
        return self

    def describe(self) -> str:
        if self.factory is not None:
            args = ', '.join(f'{k}={v!r}' for k, v in self.params.items())
            return f'{self.factory}({args})'
        return self.path or self.corpus or ''


class CheckRequest(BaseModel):
    model_config = ConfigDict(extra='forbid')

    id: str
    params: dict[str, Any] = Field(default_factory=dict)
    tolerance: Optional[float] = None
    mode: Optional[ModeRequest] = None

    @model_validator(mode='before')
    @classmethod
    def from_name(cls, value: Any):
        return {'id': value} if isinstance(value, str) else value

    @field_validator('id')
    @classmethod
    def known_check(cls, value: str) -> str:
        try:
            return canonical_check_id(value)
        except ConfigError as e:
            raise ValueError(str(e)) from None


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    schema_version: Literal[1] = Field(alias='schema')
    kernel: KernelSource
    checks: list[CheckRequest] = Field(min_length=1)
    mode: ModeRequest = 'exact'
    trials: PositiveInt = 1000
    seed: int = Field(ge=0, lt=SEED_LIMIT)
    tolerances: dict[str, float] = Field(default_factory=dict)
    output_dir: str = 'out'

    @field_validator('tolerances')
    @classmethod
    def known_tolerances(cls, value: dict[str, float]) -> dict[str, float]:
        out = {}
        for key, tol in value.items():
            if key in Settings.model_fields:
                out[key] = tol
                continue
            try:
                out[canonical_check_id(key)] = tol
            except ConfigError:
                raise ValueError(f'tolerance key {key!r} is neither a setting nor a check id') from None
        return out

    def check_tolerance(self, request: CheckRequest) -> float | None:
        if request.tolerance is not None:
            return request.tolerance
        return self.tolerances.get(request.id)

    def mode_for(self, request: CheckRequest) -> ModeRequest:
        return request.mode or self.mode

    def setting_overrides(self) -> dict[str, float]:
        return {k: v for k, v in self.tolerances.items() if k not in REGISTRY}

    def with_overrides(self, **changes: Any) -> ExperimentConfig:
        """Copy with CLI flags applied, validated like the file itself."""
        data = self.model_dump(by_alias=True)
        for key, value in changes.items():
            if value is None:
                continue
            if key == 'tolerances':
                data['tolerances'] = {**data['tolerances'], **value}
            else:
                data[key] = value
        return validate_config(data)


def validate_config(data: Any) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f'invalid experiment config: {e}') from e


def load_config(path: str | Path) -> ExperimentConfig:
    data = read_json(path)
    config = validate_config(data)
    for field in ('path', 'corpus'):
        value = getattr(config.kernel, field)
        if value is not None and not Path(value).is_absolute():
            resolved = Path(path).parent / value
            if resolved.exists():
                config.kernel = config.kernel.model_copy(update={field: str(resolved)})
    logger.debug('loaded experiment config from %s', path)
    return config


def check_modes(config: ExperimentConfig, request: CheckRequest) -> list[Mode]:
    return job_modes(request.id, config.mode_for(request))
