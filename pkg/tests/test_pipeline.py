import csv
import json

import pytest

from dppcond.config import settings
from dppcond.corpus import CorpusEntry, CorpusSpec, gen_corpus
from dppcond.experiment import validate_config
from dppcond.graph.pipeline import build_graph, run_experiment
from dppcond.types import KernelEntry, RunState


def config(tmp_path, **changes):
    data = {
        'schema': 1,
        'kernel': 'uniform_rank1(n=2)',
        'checks': ['one_step_martingale', 'tail_mixing'],
        'seed': 11,
        'output_dir': str(tmp_path / 'out'),
    }
    data.update(changes)
    return validate_config(data)


@pytest.mark.asyncio
async def test_passing_run_writes_every_file(tmp_path):
    state = await run_experiment(config(tmp_path))
    assert state['exit_code'] == 0
    out = tmp_path / 'out'
    report = json.loads((out / 'report.json').read_text())
    assert [r['check_id'] for r in report] == ['one_step_martingale', 'tail_mixing']
    assert all(r['pass'] for r in report)
    rows = list(csv.DictReader((out / 'summary.csv').open()))
    assert rows[0]['pass'] == 'true' and rows[0]['kernel_id'] == 'uniform_rank1(n=2)'
    meta = json.loads((out / 'metadata.json').read_text())
    assert meta['seed'] == 11 and 'numpy' in meta['versions']
    assert (out / 'plot_tail_mixing_0.csv').exists()


@pytest.mark.asyncio
async def test_runs_are_reproducible(tmp_path, monkeypatch):
    checks = ['one_step_martingale', 'tail_mixing', 'sampler_agreement']
    monkeypatch.setattr(settings, 'threads', 1)
    first = await run_experiment(config(tmp_path / 'a', mode='mc', trials=300, checks=checks))
    monkeypatch.setattr(settings, 'threads', 4)
    second = await run_experiment(config(tmp_path / 'b', mode='mc', trials=300, checks=checks))
    assert len(first['results']) == 3 and second['exit_code'] == first['exit_code']
    assert all(r.mode == 'mc' for r in first['results'])
    report = (tmp_path / 'a' / 'out' / 'report.json').read_bytes()
    assert report == (tmp_path / 'b' / 'out' / 'report.json').read_bytes()
    assert (tmp_path / 'a' / 'out' / 'summary.csv').read_bytes() == (tmp_path / 'b' / 'out' / 'summary.csv').read_bytes()


@pytest.mark.asyncio
async def test_negative_tolerance_fails_with_exit_one(tmp_path):
    state = await run_experiment(config(tmp_path, checks=[{'id': 'one_step_martingale', 'tolerance': -1.0}]))
    assert state['exit_code'] == 1
    assert not state['results'][0].passed


@pytest.mark.asyncio
async def test_missing_kernel_file_exits_two(tmp_path):
    state = await run_experiment(config(tmp_path, kernel=str(tmp_path / 'missing.json')))
    assert state['exit_code'] == 2
    assert state['errors']
    assert json.loads((tmp_path / 'out' / 'report.json').read_text()) == []


@pytest.mark.asyncio
async def test_setting_overrides_are_scoped(tmp_path):
    before = settings.exact_tol
    state = await run_experiment(config(tmp_path, tolerances={'exact_tol': 1e-6}))
    assert state['results'][0].tolerance == 1e-6
    assert settings.exact_tol == before


@pytest.mark.asyncio
async def test_corpus_run(tmp_path):
    spec = CorpusSpec(entries=[CorpusEntry(kind='projection', count=2, n=4), CorpusEntry(kind='diagonal', count=1, n=3)])
    gen_corpus(5, spec, tmp_path / 'corpus')
    state = await run_experiment(config(tmp_path, kernel={'corpus': str(tmp_path / 'corpus')}, checks=['dilation']))
    assert state['exit_code'] == 0
    assert [r.instance for r in state['results']] == [0, 1, 2]
    assert {r.kernel_id for r in state['results']} == {'kernel_0000', 'kernel_0001', 'kernel_0002'}


def test_graph_compiles():
    assert build_graph() is not None


@pytest.mark.asyncio
async def test_state_carries_only_declared_fields(tmp_path):
    state = await run_experiment(config(tmp_path))
    assert set(state) <= set(RunState.__annotations__)
    assert {'kernels', 'jobs', 'results', 'exit_code', 'written', 'run_metadata'} <= set(state)
    for entry in state['kernels']:
        assert set(entry) == set(KernelEntry.__annotations__)
