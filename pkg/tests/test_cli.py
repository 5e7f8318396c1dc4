import json

import pytest

from cli import main
from dppcond.kernel.factories import diagonal, uniform_rank1
from dppcond.kernel.io import save_kernel


def write_config(tmp_path, **changes):
    data = {
        'schema': 1,
        'kernel': 'kernel.json',
        'checks': ['one_step_martingale', 'dilation'],
        'seed': 3,
        'output_dir': str(tmp_path / 'out'),
    }
    data.update(changes)
    path = tmp_path / 'experiment.json'
    path.write_text(json.dumps(data))
    return path


@pytest.mark.asyncio
async def test_describe(tmp_path, capsys):
    path = save_kernel(uniform_rank1(2), tmp_path / 'k.json')
    assert await main(['describe', str(path)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == 'n=2, rank 1 projection, trace 1.0'
    assert await main(['describe', '--json', str(path)]) == 0
    assert json.loads(capsys.readouterr().out)['is_projection'] is True


@pytest.mark.asyncio
async def test_run_passes(tmp_path, capsys):
    save_kernel(diagonal([0.3, 0.5, 0.9]), tmp_path / 'kernel.json')
    code = await main(['run', '--config', str(write_config(tmp_path)), '--mode', 'both', '--trials', '50'])
    assert code == 0
    assert '3/3 checks passed' in capsys.readouterr().out
    assert (tmp_path / 'out' / 'summary.csv').exists()


@pytest.mark.asyncio
async def test_run_reports_failures(tmp_path, capsys):
    save_kernel(diagonal([0.3, 0.5]), tmp_path / 'kernel.json')
    path = write_config(tmp_path)
    code = await main(['run', '--config', str(path), '--tol-override', 'one_step_martingale=-1'])
    assert code == 1
    assert 'FAIL one_step_martingale[0] exact' in capsys.readouterr().out


@pytest.mark.asyncio
@pytest.mark.parametrize('argv', [
    ['--trials', '0'],
    ['--tol-override', 'exact_tol'],
    ['--tol-override', 'nonsense=1'],
])
async def test_bad_run_arguments_exit_two(tmp_path, argv):
    save_kernel(uniform_rank1(2), tmp_path / 'kernel.json')
    assert await main(['run', '--config', str(write_config(tmp_path)), *argv]) == 2


@pytest.mark.asyncio
async def test_malformed_inputs_exit_two(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"schema": 1, ')
    assert await main(['run', '--config', str(bad)]) == 2
    assert await main(['describe', str(bad)]) == 2
    assert await main(['describe', str(tmp_path / 'missing.json')]) == 2


@pytest.mark.asyncio
async def test_gen_corpus(tmp_path, capsys):
    out = tmp_path / 'corpus'
    code = await main(['gen-corpus', '--seed', '4', '--count', '3', '--n', '4', '--class', 'eigenvalue=1', '--out', str(out)])
    assert code == 0
    manifest = json.loads((out / 'manifest.json').read_text())
    assert [row['class'] for row in manifest['kernels']] == ['eigenvalue_one'] * 3
    assert 'wrote 3 kernels' in capsys.readouterr().out
    assert await main(['gen-corpus', '--seed', '4', '--count', '1', '--class', 'wobbly', '--out', str(out)]) == 2
