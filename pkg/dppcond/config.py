import os
from contextlib import contextmanager
from typing import Iterator, Mapping

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Kernel validation
    hermitian_tol: float = Field(default=1e-9, alias='DPPCOND_HERMITIAN_TOL')
    spectral_tol: float = Field(default=1e-8, alias='DPPCOND_SPECTRAL_TOL')
    clip_floor: float = Field(default=1e-13, alias='DPPCOND_CLIP_FLOOR')

    # Degeneracy thresholds, relative to the matrix scale max|K|
    diag_tol: float = Field(default=1e-12, alias='DPPCOND_DIAG_TOL')
    sv_tol: float = Field(default=1e-12, alias='DPPCOND_SV_TOL')
    gap_tol: float = Field(default=1e-12, alias='DPPCOND_GAP_TOL')
    series_tol: float = Field(default=1e-13, alias='DPPCOND_SERIES_TOL')
    series_max_terms: int = Field(default=10000, alias='DPPCOND_SERIES_MAX_TERMS')
    rank_tol: float = Field(default=1e-10, alias='DPPCOND_RANK_TOL')

    # Enumeration oracle
    positive_prob_tol: float = Field(default=1e-12, alias='DPPCOND_POSITIVE_PROB_TOL')
    oracle_floor: float = Field(default=1e-10, alias='DPPCOND_ORACLE_FLOOR')
    distribution_tol: float = Field(default=1e-9, alias='DPPCOND_DISTRIBUTION_TOL')
    enumeration_cap: int = Field(default=14, alias='DPPCOND_ENUMERATION_CAP')
    enumeration_hard_cap: int = Field(default=20, alias='DPPCOND_ENUMERATION_HARD_CAP')

    # Verification
    exact_tol: float = Field(default=1e-8, alias='DPPCOND_EXACT_TOL')
    mc_sigmas: float = Field(default=4.0, alias='DPPCOND_MC_SIGMAS')
    tail_noise_sigmas: float = Field(default=2.0, alias='DPPCOND_TAIL_NOISE_SIGMAS')
    sampler_breakdown_tol: float = Field(default=1e-9, alias='DPPCOND_SAMPLER_BREAKDOWN_TOL')

    threads: int = Field(default=None, alias='DPPCOND_THREADS', validate_default=True)
    log_level: str = Field(default='INFO', alias='DPPCOND_LOG_LEVEL')

    @field_validator('threads', mode='before')
    @classmethod
    def normalize_threads(cls, value: int | str | None):
        fallback = os.cpu_count() or 1
        if value is None or str(value).strip() == '':
            return fallback
        v = int(value)
        return v if v > 0 else fallback

    @field_validator('log_level', mode='before')
    @classmethod
    def normalize_log_level(cls, value: str | None):
        if value is None:
            return 'INFO'
        v = str(value).strip().upper()
        return v or 'INFO'

    model_config = SettingsConfigDict(env_file='.env', extra='ignore', populate_by_name=True)

settings = Settings()


def apply_overrides(overrides: Mapping[str, float], target: Settings | None = None) -> dict[str, float]:
    """Set every override naming a settings field in place.

    Returns the overrides that are not settings fields (check tolerances).
    """
    target = target or settings
    remaining: dict[str, float] = {}
    for key, value in overrides.items():
        if key in Settings.model_fields:
            current = getattr(target, key)
            setattr(target, key, type(current)(value))
        else:
            remaining[key] = float(value)
    return remaining


@contextmanager
def overridden(overrides: Mapping[str, float]) -> Iterator[dict[str, float]]:
    """Apply overrides for the duration of a block, restoring previous values after."""
    snapshot = {key: getattr(settings, key) for key in overrides if key in Settings.model_fields}
    try:
        yield apply_overrides(overrides)
    finally:
        for key, value in snapshot.items():
            setattr(settings, key, value)
