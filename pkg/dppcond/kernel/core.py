"""Validated kernels on a finite ground set.

A kernel here is a Hermitian positive contraction: an n x n matrix with
spectrum in [0, 1]. Every constructor goes through ``validate_kernel`` so the
objects below can be shared freely; none of them mutate after construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from dppcond.config import settings
from dppcond.errors import (
    DimensionMismatch,
    DuplicatePoint,
    IndexOutOfRange,
    InvalidGroundSet,
    KernelError,
    NotHermitian,
    SpectrumOutOfRange,
    SquareRootFailure,
)
from dppcond.utils import matrix_scale, max_abs

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GroundSet:
    """Ordered sites with an optional embedding and quadrature weights."""

    sites: tuple
    coords: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        sites = tuple(self.sites)
        if len(set(sites)) != len(sites):
            raise InvalidGroundSet('site labels must be distinct')
        object.__setattr__(self, 'sites', sites)
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != len(sites):
                raise InvalidGroundSet(f'{coords.shape[0]} coordinates for {len(sites)} sites')
            object.__setattr__(self, 'coords', _frozen(coords))
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if weights.shape[0] != len(sites):
                raise InvalidGroundSet(f'{weights.shape[0]} weights for {len(sites)} sites')
            if np.any(weights <= 0):
                raise InvalidGroundSet('quadrature weights must be strictly positive')
            object.__setattr__(self, 'weights', _frozen(weights))

    @property
    def n(self) -> int:
        return len(self.sites)

    @classmethod
    def range(cls, n: int) -> GroundSet:
        return cls(tuple(range(n)))

    @classmethod
    def uniform_grid(cls, n: int, start: float, stop: float) -> GroundSet:
        """Midpoint grid of ``n`` cells on [start, stop]."""
        h = (stop - start) / n
        coords = start + h * (np.arange(n) + 0.5)
        return cls(tuple(range(n)), coords=coords, weights=np.full(n, h))

    def doubled(self) -> GroundSet:
        """Two disjoint copies of the sites, used by the projection dilation."""
        sites = self.sites + tuple(f"{s}'" for s in self.sites)
        coords = None if self.coords is None else np.vstack([self.coords, self.coords])
        weights = None if self.weights is None else np.concatenate([self.weights, self.weights])
        return GroundSet(sites, coords=coords, weights=weights)


@dataclass(frozen=True, eq=False)
class SiteSubset:
    """Boolean mask over the ground set (windows B, W, D and the operators chi_B)."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 1:
            raise DimensionMismatch('site mask must be one-dimensional')
        object.__setattr__(self, 'mask', _frozen(mask))

    @classmethod
    def of(cls, indices: Iterable[int], n: int) -> SiteSubset:
        mask = np.zeros(n, dtype=bool)
        for i in indices:
            i = int(i)
            if not 0 <= i < n:
                raise IndexOutOfRange(f'site {i} outside [0, {n})')
            mask[i] = True
        return cls(mask)

    @classmethod
    def empty(cls, n: int) -> SiteSubset:
        return cls(np.zeros(n, dtype=bool))

    @classmethod
    def full(cls, n: int) -> SiteSubset:
        return cls(np.ones(n, dtype=bool))

    @property
    def n(self) -> int:
        return self.mask.shape[0]

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def complement(self) -> SiteSubset:
        return SiteSubset(~self.mask)

    def union(self, other: SiteSubset) -> SiteSubset:
        self._same_size(other)
        return SiteSubset(self.mask | other.mask)

    def intersection(self, other: SiteSubset) -> SiteSubset:
        self._same_size(other)
        return SiteSubset(self.mask & other.mask)

    def issubset(self, other: SiteSubset) -> bool:
        self._same_size(other)
        return not np.any(self.mask & ~other.mask)

    def isdisjoint(self, other: SiteSubset) -> bool:
        self._same_size(other)
        return not np.any(self.mask & other.mask)

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.n and bool(self.mask[i])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SiteSubset) and np.array_equal(self.mask, other.mask)

    def __hash__(self) -> int:
        return hash(self.mask.tobytes())

    def __repr__(self) -> str:
        return f'SiteSubset({self.indices.tolist()}, n={self.n})'

    def _same_size(self, other: SiteSubset):
        if other.n != self.n:
            raise DimensionMismatch(f'site masks of sizes {self.n} and {other.n}')


@dataclass(frozen=True)
class Configuration:
    """Finite simple configuration: strictly increasing site indices."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise IndexOutOfRange(f'negative site in {idx}')
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DuplicatePoint(f'configuration indices must be strictly increasing: {idx}')
        object.__setattr__(self, 'indices', idx)

    @classmethod
    def of(cls, points: Iterable[int]) -> Configuration:
        pts = [int(p) for p in points]
        if len(set(pts)) != len(pts):
            raise DuplicatePoint(f'repeated site in {pts}')
        return cls(tuple(sorted(pts)))

    @classmethod
    def from_bitmask(cls, bits: int, sites: Sequence[int] | None = None) -> Configuration:
        """Little-endian decoding: bit k set means ``sites[k]`` (default k) is occupied."""
        out = []
        k = 0
        while bits:
            if bits & 1:
                out.append(k if sites is None else int(sites[k]))
            bits >>= 1
            k += 1
        return cls.of(out)

    def bitmask(self, sites: Sequence[int] | None = None) -> int:
        if sites is None:
            return sum(1 << i for i in self.indices)
        position = {int(s): k for k, s in enumerate(sites)}
        try:
            return sum(1 << position[i] for i in self.indices)
        except KeyError as e:
            raise IndexOutOfRange(f'site {e.args[0]} is not among {list(sites)}') from None

    def check_range(self, n: int) -> Configuration:
        if self.indices and self.indices[-1] >= n:
            raise IndexOutOfRange(f'site {self.indices[-1]} outside [0, {n})')
        return self

    def restrict(self, window: SiteSubset) -> Configuration:
        """X intersected with the window."""
        self.check_range(window.n)
        return Configuration(tuple(i for i in self.indices if window.mask[i]))

    def count_in(self, window: SiteSubset) -> int:
        return len(self.restrict(window))

    def to_mask(self, n: int) -> SiteSubset:
        return SiteSubset.of(self.indices, n)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Hermitian positive contraction; build through ``validate_kernel``."""

    entries: np.ndarray
    is_projection: bool
    hermitian_tol: float
    spectral_tol: float
    ground: GroundSet | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'entries', _frozen(self.entries))
        if self.ground is not None and self.ground.n != self.n:
            raise DimensionMismatch(f'ground set of {self.ground.n} sites for a {self.n}x{self.n} kernel')

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.entries)

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
        if self.n == 0:
            return np.zeros(0), np.zeros((0, 0), dtype=self.entries.dtype)
        w, v = np.linalg.eigh(self.entries)
        return w, v

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    @property
    def scale(self) -> float:
        return matrix_scale(self.entries)

    def rank(self, tol: float = 1e-9) -> int:
        return int(np.sum(self.eigenvalues > tol))

    def __call__(self, x: int, y: int) -> complex | float:
        return self.entries[x, y]

    def __repr__(self) -> str:
        kind = 'projection' if self.is_projection else 'contraction'
        return f'KernelMatrix(n={self.n}, {kind}, trace={self.trace:.6g})'


def validate_kernel(
    raw: np.ndarray | KernelMatrix,
    hermitian_tol: float | None = None,
    spectral_tol: float | None = None,
    *,
    ground: GroundSet | None = None,
    support: SiteSubset | None = None,
    metadata: dict[str, Any] | None = None,
) -> KernelMatrix:
    """Symmetrize, check and clip a raw matrix into a ``KernelMatrix``.

    Eigenvalues within ``spectral_tol`` of [0, 1] are clipped onto it and the
    matrix is rebuilt from the clipped spectrum; anything further out is
    rejected. When ``support`` is given only that principal block is
    validated and the rest of the result is exactly zero.
    """

    if isinstance(raw, KernelMatrix):
        ground = ground if ground is not None else raw.ground
        raw = raw.entries
    htol = settings.hermitian_tol if hermitian_tol is None else hermitian_tol
    stol = settings.spectral_tol if spectral_tol is None else spectral_tol

    m = np.asarray(raw)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f'kernel must be square, got shape {m.shape}')
    if not np.all(np.isfinite(m)):
        raise KernelError('kernel has non-finite entries')
    if np.iscomplexobj(m) and not np.any(m.imag):
        m = m.real
    m = m.astype(np.complex128 if np.iscomplexobj(m) else np.float64)

    n = m.shape[0]
    if support is not None:
        if support.n != n:
            raise DimensionMismatch(f'support mask of size {support.n} for a {n}x{n} kernel')
        idx = support.indices
        block = validate_kernel(m[np.ix_(idx, idx)], htol, stol, metadata=metadata)
        full = np.zeros_like(block.entries, shape=(n, n))
        full[np.ix_(idx, idx)] = block.entries
        return KernelMatrix(full, block.is_projection, htol, stol, ground, dict(block.metadata))

    meta = dict(metadata or {})
    if n == 0:
        meta.setdefault('clipped_excess', 0.0)
        return KernelMatrix(m, True, htol, stol, ground, meta)

    asym = max_abs(m - m.conj().T)
    if asym > htol:
        raise NotHermitian(f'asymmetry {asym:.3e} exceeds hermitian_tol {htol:.1e}')
    m = (m + m.conj().T) / 2

    w, v = np.linalg.eigh(m)
    lo, hi = float(w[0]), float(w[-1])
    if lo < -stol or hi > 1 + stol:
        raise SpectrumOutOfRange(f'spectrum [{lo:.6g}, {hi:.6g}] outside [0, 1] beyond {stol:.1e}')
    excess = max(0.0, -lo, hi - 1.0)
    if excess > settings.clip_floor:
        w = np.clip(w, 0.0, 1.0)
        m = (v * w) @ v.conj().T
        m = (m + m.conj().T) / 2
        logger.debug('clipped eigenvalue excess %.3e', excess)
    is_projection = max_abs(m @ m - m) <= stol
    meta['clipped_excess'] = excess
    return KernelMatrix(m, bool(is_projection), htol, stol, ground, meta)


def zero_kernel(like: KernelMatrix) -> KernelMatrix:
    return KernelMatrix(
        np.zeros_like(like.entries), True, like.hermitian_tol, like.spectral_tol, like.ground, {'clipped_excess': 0.0}
    )


def _entries(k: KernelMatrix | np.ndarray) -> np.ndarray:
    return k.entries if isinstance(k, KernelMatrix) else np.asarray(k)


def _check_mask(n: int, *subsets: SiteSubset):
    for s in subsets:
        if s.n != n:
            raise DimensionMismatch(f'site mask of size {s.n} for ground set of size {n}')


def compress(k: KernelMatrix | np.ndarray, a: SiteSubset, b: SiteSubset) -> np.ndarray:
    """chi_A K chi_B as a full-size, zero-padded matrix."""

    m = _entries(k)
    _check_mask(m.shape[0], a, b)
    out = np.zeros_like(m)
    rows, cols = np.ix_(a.mask, b.mask)
    out[rows, cols] = m[rows, cols]
    return out


def kernel_column(k: KernelMatrix, x: int) -> np.ndarray:
    """K_x, the column of K at site x."""
    if not 0 <= x < k.n:
        raise IndexOutOfRange(f'site {x} outside [0, {k.n})')
    return k.entries[:, x].copy()


def range_projector(k: KernelMatrix, rank_tol: float = 1e-9) -> KernelMatrix:
    """Orthogonal projection onto Ran K."""
    w, v = k.spectrum
    basis = v[:, w > rank_tol]
    return validate_kernel(basis @ basis.conj().T, k.hermitian_tol, k.spectral_tol, ground=k.ground)


def dilate_to_projection(k: KernelMatrix) -> KernelMatrix:
    """Embed K as the corner of a projection on the doubled ground set.

    Returns [[K, S], [S, 1 - K]] with S the principal square root of K - K^2,
    taken in the eigenbasis of K so that S commutes with K exactly.
    """

    w, v = k.spectrum
    gap = w - w * w
    if gap.size and gap.min() < -k.spectral_tol:
        raise SquareRootFailure(f'K - K^2 has eigenvalue {gap.min():.3e}')
    s = (v * np.sqrt(np.clip(gap, 0.0, None))) @ v.conj().T
    s = (s + s.conj().T) / 2
    eye = np.eye(k.n, dtype=k.entries.dtype)
    block = np.block([[k.entries, s], [s, eye - k.entries]])
    ground = k.ground.doubled() if k.ground is not None else None
    return validate_kernel(
        block, k.hermitian_tol, k.spectral_tol, ground=ground, metadata={'dilation_of': k.n}
    )
