import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from dppcond.errors import DimensionMismatch, DuplicatePoint, IndexOutOfRange, NotHermitian, SpectrumOutOfRange
from dppcond.kernel.core import (
    Configuration,
    GroundSet,
    SiteSubset,
    compress,
    dilate_to_projection,
    kernel_column,
    range_projector,
    validate_kernel,
)
from dppcond.kernel.factories import (
    compressed_power_trace,
    diagonal,
    quadrature_trace,
    random_contraction,
    random_projection,
    sine_kernel,
    sine_kernel_fn,
    uniform_rank1,
)


@hsettings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.booleans())
def test_validation_is_idempotent(seed, n, complex_):
    k = random_contraction(n, seed, complex_)
    again = validate_kernel(k)
    np.testing.assert_allclose(again.entries, k.entries, rtol=0, atol=1e-14)
    assert again.is_projection == k.is_projection


def test_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        validate_kernel(np.array([[0.5, 0.1], [0.0, 0.5]]))


def test_rejects_spectrum_outside_unit_interval():
    with pytest.raises(SpectrumOutOfRange):
        validate_kernel(np.array([[2.0]]))
    with pytest.raises(DimensionMismatch):
        validate_kernel(np.ones((2, 3)))


def test_clips_small_spectral_excess():
    k = validate_kernel(np.array([[1.0 + 1e-10]]))
    assert k.entries[0, 0] == 1.0
    assert k.metadata['clipped_excess'] == pytest.approx(1e-10, rel=1e-3)
    assert k.is_projection


def test_projection_flag():
    assert uniform_rank1(3).is_projection
    assert not diagonal([0.3, 0.5]).is_projection
    assert random_projection(6, 2, seed=1).rank() == 2


def test_support_block_is_zero_padded():
    raw = np.full((3, 3), 0.25)
    k = validate_kernel(raw, support=SiteSubset.of([0, 2], 3))
    assert np.all(k.entries[1, :] == 0) and np.all(k.entries[:, 1] == 0)
    assert k.entries[0, 2] == pytest.approx(0.25)


def test_site_subset_algebra():
    a = SiteSubset.of([0, 1], 4)
    b = SiteSubset.of([1, 3], 4)
    assert a.union(b) == SiteSubset.of([0, 1, 3], 4)
    assert a.intersection(b) == SiteSubset.of([1], 4)
    assert a.complement().indices.tolist() == [2, 3]
    assert not a.isdisjoint(b)
    assert SiteSubset.of([1], 4).issubset(a)
    assert 3 in b and 0 not in b
    with pytest.raises(IndexOutOfRange):
        SiteSubset.of([4], 4)


def test_configuration_rules():
    x = Configuration.of([3, 0, 2])
    assert x.indices == (0, 2, 3)
    assert Configuration.from_bitmask(x.bitmask()) == x
    assert x.restrict(SiteSubset.of([2, 3], 4)).indices == (2, 3)
    assert x.count_in(SiteSubset.of([1, 2], 4)) == 1
    with pytest.raises(DuplicatePoint):
        Configuration.of([1, 1])
    with pytest.raises(IndexOutOfRange):
        x.check_range(3)


def test_compress_and_columns():
    k = uniform_rank1(3)
    a = SiteSubset.of([0], 3)
    m = compress(k, a, a.complement())
    assert m[0, 1] == pytest.approx(1 / 3) and m[1, 0] == 0 and m[0, 0] == 0
    np.testing.assert_allclose(kernel_column(k, 2), np.full(3, 1 / 3))


@pytest.mark.parametrize('raw, expected', [
    (np.diag([0.3, 0.0]), np.diag([1.0, 0.0])),
    (np.full((2, 2), 0.5), np.full((2, 2), 0.5)),
])
def test_range_projector(raw, expected):
    np.testing.assert_allclose(range_projector(validate_kernel(raw)).entries, expected, atol=1e-12)


@pytest.mark.parametrize('complex_', [False, True])
def test_dilation_is_projection_with_kernel_corner(complex_):
    k = random_contraction(5, seed=11, complex=complex_)
    d = dilate_to_projection(k)
    m = d.entries
    assert d.n == 10 and d.is_projection
    assert np.max(np.abs(m @ m - m)) <= 1e-9
    np.testing.assert_allclose(m[:5, :5], k.entries, atol=1e-12)


def test_dilation_doubles_ground_set():
    k = sine_kernel(n=4, length=2.0)
    d = dilate_to_projection(k)
    assert d.ground.sites == (0, 1, 2, 3, "0'", "1'", "2'", "3'")
    assert GroundSet.range(3).n == 3


@pytest.mark.parametrize('power', [1, 2, 3])
def test_quadrature_trace_matches_compressed_power(power):
    k = sine_kernel(n=6, length=3.0)
    window = SiteSubset.of([1, 2, 4], 6)
    explicit = quadrature_trace(sine_kernel_fn, k.ground, window, power)
    assert explicit == pytest.approx(compressed_power_trace(k, window, power), rel=1e-9)
