"""JSON kernel files and human-readable kernel summaries.

File layout::

    {"n": 2, "complex": false, "entries": [0.5, 0.5, 0.5, 0.5],
     "ground_set": {"sites": [...], "coords": [[...], ...], "weights": [...]},
     "metadata": {...}}

``entries`` is row-major; complex kernels store ``[re, im]`` pairs. Floats
are written with their shortest round-trip representation.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from dppcond.errors import DppError, ParseError
from dppcond.kernel.core import GroundSet, KernelMatrix, validate_kernel
from dppcond.utils import dumps, read_json, to_jsonable, write_text


def kernel_to_dict(k: KernelMatrix) -> dict[str, Any]:
    flat = k.entries.reshape(-1)
    if k.is_complex:
        entries = [[float(z.real), float(z.imag)] for z in flat]
    else:
        entries = [float(v) for v in flat]
    data: dict[str, Any] = {'n': k.n, 'complex': k.is_complex, 'entries': entries}
    if k.ground is not None:
        ground: dict[str, Any] = {'sites': list(k.ground.sites)}
        if k.ground.coords is not None:
            ground['coords'] = k.ground.coords.tolist()
        if k.ground.weights is not None:
            ground['weights'] = k.ground.weights.tolist()
        data['ground_set'] = ground
    if k.metadata:
        data['metadata'] = to_jsonable(k.metadata)
    return data


def kernel_from_dict(data: Any) -> KernelMatrix:
    if not isinstance(data, dict):
        raise ParseError('kernel file must hold a JSON object')
    try:
        n = int(data['n'])
        is_complex = bool(data.get('complex', False))
        raw = np.asarray(data['entries'], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f'bad kernel object: {e!r}') from e
    if is_complex:
        if raw.shape[-1:] != (2,) or raw.size != 2 * n * n:
            raise ParseError(f'expected {n * n} [re, im] pairs, got shape {raw.shape}')
        values = (raw[..., 0] + 1j * raw[..., 1]).reshape(n, n)
    else:
        if raw.size != n * n:
            raise ParseError(f'expected {n * n} entries, got {raw.size}')
        values = raw.reshape(n, n)

    ground = None
    if data.get('ground_set') is not None:
        g = data['ground_set']
        try:
            ground = GroundSet(
                tuple(g.get('sites', range(n))),
                coords=g.get('coords'),
                weights=g.get('weights'),
            )
        except (AttributeError, TypeError, DppError) as e:
            raise ParseError(f'bad ground_set: {e}') from e
    metadata = data.get('metadata') or {}
    return validate_kernel(values, ground=ground, metadata=dict(metadata))


def save_kernel(k: KernelMatrix, path: str | Path) -> Path:
    return write_text(path, dumps(kernel_to_dict(k)))


def load_kernel(path: str | Path) -> KernelMatrix:
    return kernel_from_dict(read_json(path))


def describe_kernel(k: KernelMatrix, rank_tol: float = 1e-9) -> dict[str, Any]:
    w = k.eigenvalues
    return {
        'n': k.n,
        'complex': k.is_complex,
        'rank': k.rank(rank_tol),
        'trace': round(k.trace, 12),
        'is_projection': k.is_projection,
        'spectrum_min': float(w[0]) if w.size else 0.0,
        'spectrum_max': float(w[-1]) if w.size else 0.0,
        'clipped_excess': float(k.metadata.get('clipped_excess', 0.0)),
    }


def format_description(summary: dict[str, Any]) -> str:
    kind = 'projection' if summary['is_projection'] else 'contraction, not projection'
    head = f"n={summary['n']}, rank {summary['rank']} {kind}, trace {summary['trace']!r}"
    tail = (
        f"spectrum [{summary['spectrum_min']:.6g}, {summary['spectrum_max']:.6g}], "
        f"clipped excess {summary['clipped_excess']:.3e}"
    )
    return f'{head}\n{tail}'
