import numpy as np
import pytest

from dppcond.config import settings
from dppcond.errors import DegenerateKernel, ParseError
from dppcond.kernel.core import Configuration, SiteSubset
from dppcond.kernel.factories import diagonal, identity, random_contraction, random_projection, zeros
from dppcond.sampling.rng import SEED_LIMIT, derive_seed, trial_generator
from dppcond.sampling.sampler import SampleBatch, sample_batch, sample_conditional, sample_dpp


def test_batches_do_not_depend_on_thread_count(monkeypatch):
    k = random_contraction(7, seed=1, complex=True)
    monkeypatch.setattr(settings, 'threads', 1)
    serial = sample_batch(k, 40, master_seed=12345)
    monkeypatch.setattr(settings, 'threads', 4)
    threaded = sample_batch(k, 40, master_seed=12345)
    assert serial.configs == threaded.configs
    assert sample_dpp(k, trial_generator(12345, 17)) == serial.configs[17]


def test_projection_samples_have_rank_points():
    k = random_projection(8, 3, seed=5)
    batch = sample_batch(k, 50, master_seed=2)
    assert {len(c) for c in batch.configs} == {3}


def test_trivial_kernels():
    assert sample_dpp(identity(4), 0) == Configuration((0, 1, 2, 3))
    assert sample_dpp(zeros(4), 0) == Configuration()


def test_empirical_intensity_of_diagonal_kernel():
    k = diagonal([0.1, 0.5, 0.9])
    batch = sample_batch(k, 4000, master_seed=7)
    freq = np.mean([[i in c.indices for i in range(3)] for c in batch.configs], axis=0)
    np.testing.assert_allclose(freq, [0.1, 0.5, 0.9], atol=0.04)


def test_batch_file_round_trip(tmp_path):
    batch = sample_batch(random_contraction(5, seed=3), 10, master_seed=9, kernel_id='k0')
    back = SampleBatch.load(batch.save(tmp_path / 'samples.jsonl'))
    assert back == batch
    with pytest.raises(ParseError):
        SampleBatch.from_jsonl('')


def test_sample_conditional_refuses_degenerate_trace():
    k = diagonal([0.0, 0.5])
    with pytest.raises(DegenerateKernel):
        sample_conditional(k, Configuration((0,)), SiteSubset.of([0], 2), 0)
    x = sample_conditional(diagonal([0.5, 1.0]), Configuration(), SiteSubset.of([0], 2), 0)
    assert x == Configuration((1,))


def test_derived_seeds():
    a = derive_seed(42, 'one_step_martingale', 0, 'mc')
    assert a == derive_seed(42, 'one_step_martingale', 0, 'mc')
    assert a != derive_seed(42, 'one_step_martingale', 1, 'mc')
    assert a != derive_seed(43, 'one_step_martingale', 0, 'mc')
    assert 0 <= a < SEED_LIMIT
