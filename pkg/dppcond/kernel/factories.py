"""Kernel factories: discretized continuous kernels and random spectral classes.

Every factory returns a validated ``KernelMatrix``. Random factories take a
``seed`` (int or ``numpy.random.Generator``) and are deterministic in it.
"""

from __future__ import annotations

import itertools
import logging
from typing import Any, Callable

import numpy as np

from dppcond.errors import ConfigError, InvalidGroundSet
from dppcond.kernel.core import GroundSet, KernelMatrix, SiteSubset, compress, validate_kernel
from dppcond.sampling.rng import as_generator
from dppcond.utils import parse_call

logger = logging.getLogger(__name__)

KernelFn = Callable[[np.ndarray, np.ndarray], Any]


def discretize_kernel(
    kernel_fn: KernelFn, grid: GroundSet, *, spectral_tol: float | None = None, name: str | None = None
) -> KernelMatrix:
    """Nystrom matrix w_i^{1/2} k(x_i, x_j) w_j^{1/2} of a continuous kernel.

    ``kernel_fn`` is called once on broadcast coordinate arrays of shapes
    (n, 1, d) and (1, n, d) and must return an (n, n)-broadcastable array.
    """

    if grid.coords is None or grid.weights is None:
        raise InvalidGroundSet('discretization needs coordinates and quadrature weights')
    x = grid.coords
    n = grid.n
    values = np.broadcast_to(np.asarray(kernel_fn(x[:, None, :], x[None, :, :])), (n, n))
    root = np.sqrt(grid.weights)
    raw = root[:, None] * values * root[None, :]
    kernel = validate_kernel(raw, spectral_tol=spectral_tol, ground=grid, metadata={'factory': name or 'discretized'})
    logger.info(
        'discretized %s on %d sites (clipped excess %.3e)', name or 'kernel', n, kernel.metadata['clipped_excess']
    )
    return kernel


def sine_kernel_fn(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """sin(pi(x - y)) / (pi(x - y)) on the first coordinate."""
    return np.sinc(x[..., 0] - y[..., 0])


def bergman_kernel_fn(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bergman kernel of the unit disk, 1 / (pi (1 - z conj(w))^2), with z = x0 + i x1."""
    z = x[..., 0] + 1j * x[..., 1]
    w = y[..., 0] + 1j * y[..., 1]
    return 1.0 / (np.pi * (1.0 - z * np.conj(w)) ** 2)


def sine_kernel(n: int = 64, length: float = 8.0) -> KernelMatrix:
    return discretize_kernel(sine_kernel_fn, GroundSet.uniform_grid(n, 0.0, length), name='sine')


def disk_grid(n_radial: int, n_angular: int, radius: float) -> GroundSet:
    """Gauss-Legendre radii times uniform angles on the disk of the given radius."""

    if not 0 < radius < 1:
        raise ConfigError(f'disk radius must lie in (0, 1), got {radius}')
    nodes, gl_weights = np.polynomial.legendre.leggauss(n_radial)
    rho = radius * (nodes + 1) / 2
    rho_w = radius / 2 * gl_weights
    theta = 2 * np.pi * np.arange(n_angular) / n_angular
    r, t = np.meshgrid(rho, theta, indexing='ij')
    weights = (rho_w[:, None] * rho[:, None] * (2 * np.pi / n_angular)) * np.ones_like(t)
    coords = np.stack([(r * np.cos(t)).ravel(), (r * np.sin(t)).ravel()], axis=1)
    return GroundSet(tuple(range(coords.shape[0])), coords=coords, weights=weights.ravel())


def bergman_kernel(n_radial: int = 6, n_angular: int = 12, radius: float = 0.7) -> KernelMatrix:
    return discretize_kernel(bergman_kernel_fn, disk_grid(n_radial, n_angular, radius), name='bergman')


def quadrature_trace(kernel_fn: KernelFn, grid: GroundSet, window: SiteSubset, k: int) -> complex:
    """Sum of K(x1,x2)...K(xk,x1) w1...wk over all k-tuples of window sites."""

    if grid.coords is None or grid.weights is None:
        raise InvalidGroundSet('quadrature trace needs coordinates and weights')
    sites = window.indices.tolist()
    x, w = grid.coords, grid.weights

    def value(a: int, b: int) -> complex:
        return complex(np.asarray(kernel_fn(x[a], x[b])))

    total = 0j
    for path in itertools.product(sites, repeat=k):
        term = 1 + 0j
        for a, b in zip(path, path[1:] + path[:1]):
            term *= value(a, b) * w[a]
        total += term
    return total


def compressed_power_trace(kernel: KernelMatrix, window: SiteSubset, k: int) -> complex:
    """tr((chi_B K chi_B)^k)."""
    block = compress(kernel, window, window)
    return complex(np.trace(np.linalg.matrix_power(block, k)))


# Closed-form kernels

def identity(n: int) -> KernelMatrix:
    return validate_kernel(np.eye(n), metadata={'factory': 'identity'})


def zeros(n: int) -> KernelMatrix:
    return validate_kernel(np.zeros((n, n)), metadata={'factory': 'zeros'})


def diagonal(values: list[float]) -> KernelMatrix:
    return validate_kernel(np.diag(np.asarray(values, dtype=float)), metadata={'factory': 'diagonal'})


def scaled_ones(n: int, c: float) -> KernelMatrix:
    return validate_kernel(np.full((n, n), float(c)), metadata={'factory': 'scaled_ones'})


def uniform_rank1(n: int) -> KernelMatrix:
    """Projection onto the constants: one particle, uniformly placed."""
    return validate_kernel(np.full((n, n), 1.0 / n), metadata={'factory': 'uniform_rank1'})


# Random spectral classes

def _orthonormal(n: int, k: int, rng: np.random.Generator, complex_: bool) -> np.ndarray:
    z = rng.standard_normal((n, k))
    if complex_:
        z = z + 1j * rng.standard_normal((n, k))
    q, r = np.linalg.qr(z)
    # fix column phases so the basis is Haar distributed
    d = np.diagonal(r)
    phases = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    return q * phases


def from_spectrum(eigenvalues: np.ndarray, seed: Any = None, complex: bool = False) -> KernelMatrix:
    """Random unitary (orthogonal) conjugation of a prescribed spectrum."""
    rng = as_generator(seed)
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.shape[0]
    v = _orthonormal(n, n, rng, complex)
    return validate_kernel((v * lam) @ v.conj().T)


def random_projection(n: int, rank: int, seed: Any = None, complex: bool = False) -> KernelMatrix:
    if not 0 <= rank <= n:
        raise ConfigError(f'rank {rank} outside [0, {n}]')
    rng = as_generator(seed)
    v = _orthonormal(n, rank, rng, complex)
    k = validate_kernel(v @ v.conj().T, metadata={'factory': 'random_projection', 'rank': rank})
    return k


def random_contraction(n: int, seed: Any = None, complex: bool = False) -> KernelMatrix:
    rng = as_generator(seed)
    lam = rng.uniform(0.0, 1.0, n)
    k = from_spectrum(lam, rng, complex)
    return validate_kernel(k, metadata={'factory': 'random_contraction'})


def random_diagonal(n: int, seed: Any = None) -> KernelMatrix:
    rng = as_generator(seed)
    return validate_kernel(np.diag(rng.uniform(0.0, 1.0, n)), metadata={'factory': 'random_diagonal'})


def eigenvalue_one(n: int, seed: Any = None, complex: bool = False) -> KernelMatrix:
    """Contraction with a site-localized eigenvalue 1, so some windows have zero gap probability."""

    rng = as_generator(seed)
    site = int(rng.integers(n))
    m = np.zeros((n, n), dtype=np.complex128 if complex else np.float64)
    rest = [i for i in range(n) if i != site]
    if rest:
        m[np.ix_(rest, rest)] = from_spectrum(rng.uniform(0.0, 1.0, len(rest)), rng, complex).entries
    m[site, site] = 1.0
    return validate_kernel(m, metadata={'factory': 'eigenvalue_one', 'unit_site': site})


def near_one(n: int, seed: Any = None, complex: bool = False, defect: float = 1e-6) -> KernelMatrix:
    """Spectrum with eigenvalues at 1 - defect next to uniform ones."""

    rng = as_generator(seed)
    lam = rng.uniform(0.0, 1.0, n)
    hard = rng.choice(n, size=max(1, n // 3), replace=False)
    lam[hard] = 1.0 - defect
    return validate_kernel(from_spectrum(lam, rng, complex), metadata={'factory': 'near_one', 'defect': defect})


def random_projection_avoiding(window: SiteSubset, rank: int, seed: Any = None, complex: bool = False) -> np.ndarray:
    """Random rank-``rank`` orthogonal projection Q with chi_B Q = 0."""

    rng = as_generator(seed)
    free = window.complement().indices
    rank = min(rank, free.size)
    q = np.zeros((window.n, window.n), dtype=np.complex128 if complex else np.float64)
    if rank == 0:
        return q
    v = _orthonormal(free.size, rank, rng, complex)
    q[np.ix_(free, free)] = v @ v.conj().T
    return q


FACTORIES: dict[str, Callable[..., KernelMatrix]] = {
    'identity': identity,
    'zeros': zeros,
    'diagonal': diagonal,
    'scaled_ones': scaled_ones,
    'uniform_rank1': uniform_rank1,
    'sine': sine_kernel,
    'bergman': bergman_kernel,
    'random_projection': random_projection,
    'random_contraction': random_contraction,
    'random_diagonal': random_diagonal,
    'eigenvalue_one': eigenvalue_one,
    'near_one': near_one,
}


def build_kernel(name: str, params: dict[str, Any] | None = None) -> KernelMatrix:
    """Build a kernel from a registered factory name, or from the call form ``"name(k=v)"``."""

    if params is None and '(' in name:
        name, params = parse_call(name)
    factory = FACTORIES.get(name)
    if factory is None:
        raise ConfigError(f'unknown kernel factory {name!r}; known: {sorted(FACTORIES)}')
    try:
        return factory(**(params or {}))
    except TypeError as e:
        raise ConfigError(f'bad parameters for factory {name!r}: {e}') from e
