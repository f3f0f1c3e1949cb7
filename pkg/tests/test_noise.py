import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from coherent_collapse.noise import NoisePath, coarsen, trajectory_key


def test_same_seed_same_increments_bitwise():
    a = NoisePath(3, 5, 2, 0.01).increments(100)
    b = NoisePath(3, 5, 2, 0.01).increments(100)
    assert a.tobytes() == b.tobytes()


def test_distinct_trajectories_and_seeds_differ():
    base = NoisePath(3, 5, 1, 0.01).increments(50)
    assert not np.array_equal(base, NoisePath(3, 6, 1, 0.01).increments(50))
    assert not np.array_equal(base, NoisePath(4, 5, 1, 0.01).increments(50))


@given(st.integers(0, 10 ** 6), st.integers(0, 200), st.integers(1, 5))
def test_random_access_matches_bulk(seed, step, k):
    path = NoisePath(seed, 1, k, 0.04)
    bulk = path.increments(step + 3)
    for ch in range(k):
        assert path.at(step, ch) == bulk[step, ch]
    np.testing.assert_array_equal(path.increments(3, start_step=step), bulk[step:])


def test_increments_are_normal_with_variance_dt():
    dt = 0.02
    x = NoisePath(11, 0, 4, dt).increments(25_000).ravel()
    assert abs(x.mean()) < 4 * np.sqrt(dt / x.size)
    assert x.var() == pytest.approx(dt, rel=0.02)
    assert stats.kstest(x / np.sqrt(dt), "norm").pvalue > 1e-3


def test_channels_are_uncorrelated():
    x = NoisePath(12, 0, 3, 1.0).increments(20_000)
    c = np.corrcoef(x.T)
    assert np.all(np.abs(c[np.triu_indices(3, 1)]) < 0.04)


def test_coarsen_sums_blocks_and_checks_divisibility():
    fine = NoisePath(1, 0, 2, 0.01).increments(8)
    np.testing.assert_allclose(coarsen(fine, 4), fine.reshape(2, 4, 2).sum(axis=1))
    with pytest.raises(ValueError):
        coarsen(fine, 3)


def test_seed_required():
    with pytest.raises(ValueError):
        trajectory_key(None, 0)
