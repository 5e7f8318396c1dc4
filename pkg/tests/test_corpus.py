import json

import pytest

from dppcond.corpus import DEFAULT_CORPUS, CorpusEntry, CorpusSpec, gen_corpus, load_corpus_spec, load_manifest
from dppcond.errors import ConfigError


def test_same_seed_same_bytes(tmp_path):
    spec = CorpusSpec(entries=[
        CorpusEntry(kind='projection', count=3, n=(2, 6), rank=(1, 2)),
        CorpusEntry(kind='contraction', count=2, n=4, complex=True),
    ])
    gen_corpus(9, spec, tmp_path / 'a')
    gen_corpus(9, spec, tmp_path / 'b')
    for name in ['manifest.json'] + [f'kernel_{i:04d}.json' for i in range(5)]:
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
    gen_corpus(10, spec, tmp_path / 'c')
    assert (tmp_path / 'a' / 'kernel_0000.json').read_bytes() != (tmp_path / 'c' / 'kernel_0000.json').read_bytes()


def test_manifest_rows_and_loading(tmp_path):
    spec = CorpusSpec(entries=[CorpusEntry(kind='projection', count=2, n=5, rank=2), CorpusEntry(kind='near-one', n=3)])
    rows = gen_corpus(1, spec, tmp_path)
    assert [r['class'] for r in rows] == ['projection', 'projection', 'near_one']
    assert rows[0]['is_projection'] and not rows[2]['is_projection']
    loaded = load_manifest(tmp_path)
    assert [kid for kid, _ in loaded] == ['kernel_0000', 'kernel_0001', 'kernel_0002']
    assert loaded[0][1].trace == pytest.approx(2.0)


def test_empty_spec_writes_empty_manifest(tmp_path):
    assert gen_corpus(0, CorpusSpec(), tmp_path) == []
    assert json.loads((tmp_path / 'manifest.json').read_text())['kernels'] == []


def test_spec_files(tmp_path):
    path = tmp_path / 'spec.json'
    path.write_text(json.dumps({'entries': [{'kind': 'eigenvalue=1', 'count': 2, 'n': [3, 5]}]}))
    spec = load_corpus_spec(path)
    assert spec.entries[0].kind == 'eigenvalue_one' and spec.entries[0].n == (3, 5)
    path.write_text(json.dumps({'entries': [{'kind': 'banana'}]}))
    with pytest.raises(ConfigError):
        load_corpus_spec(path)


def test_default_corpus_size():
    assert sum(e.count for e in DEFAULT_CORPUS.entries) == 200


def test_bad_seed(tmp_path):
    with pytest.raises(ConfigError):
        gen_corpus(-1, CorpusSpec(), tmp_path)
