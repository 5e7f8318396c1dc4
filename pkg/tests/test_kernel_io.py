import json

import numpy as np
import pytest

from dppcond.errors import IoFailure, ParseError
from dppcond.kernel.factories import diagonal, random_contraction, sine_kernel, uniform_rank1
from dppcond.kernel.io import describe_kernel, format_description, kernel_from_dict, load_kernel, save_kernel


def test_complex_kernel_file(tmp_path):
    k = random_contraction(4, seed=3, complex=True)
    path = save_kernel(k, tmp_path / 'k.json')
    data = json.loads(path.read_text())
    assert data['complex'] is True and len(data['entries']) == 16 and len(data['entries'][0]) == 2
    back = load_kernel(path)
    np.testing.assert_allclose(back.entries, k.entries, rtol=0, atol=1e-15)


def test_ground_set_survives(tmp_path):
    k = sine_kernel(n=5, length=2.0)
    back = load_kernel(save_kernel(k, tmp_path / 'sine.json'))
    np.testing.assert_allclose(back.ground.coords, k.ground.coords)
    np.testing.assert_allclose(back.ground.weights, k.ground.weights)
    assert back.metadata['factory'] == 'sine'


def test_describe_projection():
    summary = describe_kernel(uniform_rank1(2))
    assert format_description(summary).splitlines()[0] == 'n=2, rank 1 projection, trace 1.0'


def test_describe_contraction():
    summary = describe_kernel(diagonal([0.3, 0.5]))
    assert summary['trace'] == pytest.approx(0.8) and not summary['is_projection']
    assert 'trace 0.8' in format_description(summary)
    assert 'not projection' in format_description(summary)


@pytest.mark.parametrize('text', ['{"n": 2, ', '[1, 2]', '{"n": 2, "entries": [1, 2, 3]}'])
def test_malformed_files(tmp_path, text):
    path = tmp_path / 'bad.json'
    path.write_text(text)
    with pytest.raises(ParseError):
        load_kernel(path)


def test_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        load_kernel(tmp_path / 'missing.json')
    with pytest.raises(ParseError):
        kernel_from_dict({'n': 1, 'complex': True, 'entries': [0.5]})
