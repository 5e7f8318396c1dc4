"""Utility helpers for dppcond: retried file IO, norms and small parsers."""

from __future__ import annotations

import ast
import json
import re
from pathlib import Path
from typing import Any, Callable, Tuple, TypeVar

import numpy as np
from tenacity import retry, stop_after_attempt, wait_exponential

from dppcond.errors import IoFailure, ParseError

T = TypeVar('T')

_TINY = np.finfo(float).tiny


@retry(stop=stop_after_attempt(3), wait=wait_exponential(multiplier=0.1, min=0.1, max=1), reraise=True)
def with_retry(fn: Callable[..., T], *args: Any, **kwargs: Any) -> T:
    """Execute ``fn`` with basic retry semantics."""
    return fn(*args, **kwargs)


def read_text(path: str | Path) -> str:
    try:
        return with_retry(Path(path).read_text, encoding='utf-8')
    except OSError as e:
        raise IoFailure(f'cannot read {path}: {e}') from e


def write_text(path: str | Path, text: str) -> Path:
    target = Path(path)
    try:
        with_retry(target.parent.mkdir, parents=True, exist_ok=True)
        with_retry(target.write_text, text, encoding='utf-8')
    except OSError as e:
        raise IoFailure(f'cannot write {target}: {e}') from e
    return target


def read_json(path: str | Path) -> Any:
    text = read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f'{path}: malformed JSON ({e.msg} at line {e.lineno})') from e


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays (recursively) into plain Python values."""

    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    return value


def dumps(value: Any) -> str:
    """Deterministic JSON text: sorted keys, shortest round-trip floats."""
    return json.dumps(to_jsonable(value), indent=2, sort_keys=True) + '\n'


def max_abs(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def matrix_scale(m: np.ndarray) -> float:
    """Magnitude used to turn relative degeneracy thresholds into absolute ones."""
    return max(max_abs(m), _TINY)


def op_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values; Hermitian input uses the eigenvalue magnitudes."""

    m = np.asarray(m)
    if not m.size:
        return 0.0
    if np.allclose(m, m.conj().T, rtol=0.0, atol=1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh(m))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


_CALL = re.compile(r'^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$', re.DOTALL)


def parse_call(text: str) -> Tuple[str, dict[str, Any]]:
    """Split ``"name(k=v, ...)"`` into the name and its literal keyword arguments."""

    m = _CALL.match(text)
    if not m:
        raise ParseError(f'not a factory call: {text!r}')
    name, body = m.group(1), (m.group(2) or '').strip()
    if not body:
        return name, {}
    try:
        call = ast.parse(f'_({body})', mode='eval').body
        if not isinstance(call, ast.Call) or call.args:
            raise ValueError('positional arguments are not supported')
        params = {kw.arg: ast.literal_eval(kw.value) for kw in call.keywords}
    except (SyntaxError, ValueError) as e:
        raise ParseError(f'bad arguments in {text!r}: {e}') from e
    return name, params
