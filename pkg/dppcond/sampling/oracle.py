"""Brute-force enumeration oracle for determinantal laws on small ground sets.

Subsets are little-endian bitmasks: bit k of a mask refers to ``sites[k]``
of the distribution (the ground-set order unless the law was restricted).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from dppcond.config import settings
from dppcond.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NotADistribution,
    TooLarge,
    ZeroCorrelation,
    ZeroProbabilityCondition,
)
from dppcond.kernel.core import Configuration, KernelMatrix, SiteSubset

logger = logging.getLogger(__name__)

_CHUNK = 1 << 15


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(masks)
    m = masks.copy()
    while np.any(m):
        counts += m & 1
        m >>= 1
    return counts


def _select_bits(masks: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Re-index masks onto ``positions``: new bit j is old bit positions[j]."""
    out = np.zeros_like(masks)
    for j, p in enumerate(positions):
        out |= ((masks >> p) & 1) << j
    return out


@dataclass(frozen=True, eq=False)
class DppDistribution:
    """Probability vector over every subset of ``sites``."""

    probs: np.ndarray
    sites: tuple[int, ...]
    n: int

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float, copy=True)
        sites = tuple(int(s) for s in self.sites)
        if probs.shape != (1 << len(sites),):
            raise DimensionMismatch(f'{probs.shape[0]} probabilities for {len(sites)} sites')
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)
        object.__setattr__(self, 'sites', sites)

    @property
    def size(self) -> int:
        return len(self.sites)

    def _positions(self, ground: Iterable[int]) -> list[int]:
        index = {s: k for k, s in enumerate(self.sites)}
        try:
            return [index[int(s)] for s in ground]
        except KeyError as e:
            raise IndexOutOfRange(f'site {e.args[0]} is not covered by this law') from None

    def _window_sites(self, window: SiteSubset) -> list[int]:
        if window.n != self.n:
            raise DimensionMismatch(f'window of size {window.n} for a law on {self.n} sites')
        return [s for s in self.sites if window.mask[s]]

    def mass(self, config: Configuration) -> float:
        return float(self.probs[config.bitmask(self.sites)])

    def support(self, tol: float | None = None) -> list[tuple[Configuration, float]]:
        """Configurations of probability above ``tol`` with their probabilities, by bitmask."""
        tol = settings.positive_prob_tol if tol is None else tol
        masks = np.flatnonzero(self.probs > tol)
        return [(Configuration.from_bitmask(int(m), self.sites), float(self.probs[m])) for m in masks]

    def marginal(self, window: SiteSubset | Sequence[int]) -> DppDistribution:
        """Push-forward onto the sites of ``window`` (restriction of configurations)."""
        keep = self._window_sites(window) if isinstance(window, SiteSubset) else sorted(int(s) for s in window)
        positions = self._positions(keep)
        masks = np.arange(self.probs.shape[0], dtype=np.int64)
        out = np.zeros(1 << len(keep))
        np.add.at(out, _select_bits(masks, positions), self.probs)
        return DppDistribution(out, tuple(keep), self.n)

    def condition(self, window: SiteSubset, trace: Configuration) -> DppDistribution:
        """Bayes slice: the law of the remaining sites given X intersected with the window equals ``trace``."""

        inside = self._window_sites(window)
        if any(not window.mask[i] for i in trace.indices):
            raise IndexOutOfRange(f'trace {trace.indices} is not inside the window')
        rest = [s for s in self.sites if s not in set(inside)]
        masks = np.arange(self.probs.shape[0], dtype=np.int64)
        window_bits = Configuration.of(inside).bitmask(self.sites)
        trace_bits = trace.bitmask(self.sites)
        hit = (masks & window_bits) == trace_bits
        mass = float(self.probs[hit].sum())
        if mass <= settings.positive_prob_tol:
            raise ZeroProbabilityCondition(f'trace {trace.indices} has probability {mass:.3e}')
        out = np.zeros(1 << len(rest))
        np.add.at(out, _select_bits(masks[hit], self._positions(rest)), self.probs[hit])
        return DppDistribution(out / mass, tuple(rest), self.n)

    def palm(self, points: Configuration) -> DppDistribution:
        """Reduced Palm law at ``points``: size-biased slice with the points removed."""

        point_bits = points.bitmask(self.sites)
        rest = [s for s in self.sites if s not in set(points.indices)]
        masks = np.arange(self.probs.shape[0], dtype=np.int64)
        hit = (masks & point_bits) == point_bits
        rho = float(self.probs[hit].sum())
        if rho <= settings.positive_prob_tol:
            raise ZeroCorrelation(f'correlation at {points.indices} is {rho:.3e}')
        out = np.zeros(1 << len(rest))
        np.add.at(out, _select_bits(masks[hit], self._positions(rest)), self.probs[hit])
        return DppDistribution(out / rho, tuple(rest), self.n)

    def count_law(self, window: SiteSubset) -> np.ndarray:
        """P(#_window = k) for k = 0..|window|."""
        inside = self._window_sites(window)
        masks = np.arange(self.probs.shape[0], dtype=np.int64)
        counts = _popcount(_select_bits(masks, self._positions(inside)))
        return np.bincount(counts, weights=self.probs, minlength=len(inside) + 1)

    def total_variation(self, other: DppDistribution) -> float:
        return total_variation(self, other)

    def to_dict(self) -> dict[str, Any]:
        return {'n': self.n, 'sites': list(self.sites), 'probs': self.probs.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DppDistribution:
        n = int(data['n'])
        return cls(np.asarray(data['probs'], dtype=float), tuple(data.get('sites', range(n))), n)


def total_variation(p: DppDistribution, q: DppDistribution) -> float:
    if p.sites != q.sites:
        raise DimensionMismatch(f'laws on different sites: {p.sites} vs {q.sites}')
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def _correlations(entries: np.ndarray) -> np.ndarray:
    """det K_T for every subset T, by subset size in stacked batches."""

    m = entries.shape[0]
    masks = np.arange(1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    sizes = bits.sum(axis=1)
    corr = np.empty(1 << m)
    corr[0] = 1.0
    for size in range(1, m + 1):
        chosen = np.flatnonzero(sizes == size)
        for start in range(0, chosen.size, _CHUNK):
            batch = chosen[start:start + _CHUNK]
            idx = np.nonzero(bits[batch])[1].reshape(-1, size)
            blocks = entries[idx[:, :, None], idx[:, None, :]]
            corr[batch] = np.real(np.linalg.det(blocks))
    return corr


def _enumerate(entries: np.ndarray, sites: tuple[int, ...], n: int, cap: int | None) -> DppDistribution:
    m = len(sites)
    limit = min(settings.enumeration_cap if cap is None else cap, settings.enumeration_hard_cap)
    if m > limit:
        raise TooLarge(f'enumeration over {m} sites exceeds the cap of {limit}')
    f = _correlations(entries).reshape((2,) * m)
    # Moebius inversion over supersets; axis a of the reshaped array is bit m - 1 - a
    for axis in range(m):
        lo = [slice(None)] * m
        hi = [slice(None)] * m
        lo[axis], hi[axis] = 0, 1
        f[tuple(lo)] -= f[tuple(hi)]
    probs = f.reshape(-1)
    low = float(probs.min())
    if low < -settings.oracle_floor:
        raise NotADistribution(f'negative subset probability {low:.3e}')
    probs = np.clip(probs, 0.0, None)
    total = float(probs.sum())
    if abs(total - 1.0) > settings.distribution_tol:
        raise NotADistribution(f'probabilities sum to {total!r}')
    return DppDistribution(probs, sites, n)


def enumerate_distribution(k: KernelMatrix, cap: int | None = None) -> DppDistribution:
    """Exact law P_K over all 2^n subsets."""
    return _enumerate(k.entries, tuple(range(k.n)), k.n, cap)


def window_distribution(k: KernelMatrix, window: SiteSubset, cap: int | None = None) -> DppDistribution:
    """Exact law of X intersected with the window; it is determinantal with kernel chi_B K chi_B."""
    if window.n != k.n:
        raise DimensionMismatch(f'window of size {window.n} for a kernel on {k.n} sites')
    idx = window.indices
    return _enumerate(k.entries[np.ix_(idx, idx)], tuple(idx.tolist()), k.n, cap)


def gap_probability(k: KernelMatrix, window: SiteSubset) -> float:
    """det(1 - chi_B K chi_B), the probability of no particle in the window."""
    if window.n != k.n:
        raise DimensionMismatch(f'window of size {window.n} for a kernel on {k.n} sites')
    idx = window.indices
    if idx.size == 0:
        return 1.0
    block = np.eye(idx.size) - k.entries[np.ix_(idx, idx)]
    return max(float(np.real(np.linalg.det(block))), 0.0)


def correlation(k: KernelMatrix, points: Configuration) -> float:
    """det[K(x_i, x_j)], the probability that every point of ``points`` is occupied."""
    points.check_range(k.n)
    idx = list(points.indices)
    if not idx:
        return 1.0
    return float(np.real(np.linalg.det(k.entries[np.ix_(idx, idx)])))


def conditional_distribution_oracle(
    k: KernelMatrix, window: SiteSubset, trace: Configuration, cap: int | None = None
) -> DppDistribution:
    return enumerate_distribution(k, cap).condition(window, trace)


def palm_distribution_oracle(k: KernelMatrix, points: Configuration, cap: int | None = None) -> DppDistribution:
    points.check_range(k.n)
    return enumerate_distribution(k, cap).palm(points)
