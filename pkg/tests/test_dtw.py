import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rogue_sensors.data import from_arrays, normalize
from rogue_sensors.dtw import cached_dtw_matrix, check_matrix, dtw_distance, dtw_matrix
from rogue_sensors.errors import DataError

from oracles import all_warping_paths, dtw_bruteforce

seqs = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=6)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([1, 2, 3], [1, 2, 3], 0.0),
        ([0], [5], 5.0),
        ([1, 2, 3], [1, 2, 2, 3], 0.0),
        ([1, 3], [2], 2.0),
    ],
)
def test_known_values(a, b, expected):
    assert dtw_distance(a, b) == expected
    assert dtw_bruteforce(a, b) == expected


def test_path_enumeration_counts():
    # Delannoy numbers: paths on an n x m grid with the three unit steps
    assert len(all_warping_paths(1, 1)) == 1
    assert len(all_warping_paths(2, 2)) == 3
    assert len(all_warping_paths(3, 3)) == 13
    assert len(all_warping_paths(4, 4)) == 63


def test_path_set_oracle_agrees_with_recursive_oracle(rng):
    a, b = rng.normal(size=4), rng.normal(size=5)
    by_paths = min(sum(abs(a[i] - b[j]) for i, j in p) for p in all_warping_paths(4, 5))
    assert by_paths == pytest.approx(dtw_bruteforce(a, b), abs=1e-12)


def test_empty_sequence_rejected():
    with pytest.raises(DataError):
        dtw_distance([], [1.0])


def test_squared_cost(rng):
    a, b = rng.normal(size=5), rng.normal(size=4)
    assert dtw_distance(a, b, squared=True) == pytest.approx(dtw_bruteforce(a, b, squared=True), rel=1e-12)


def test_band_wide_enough_equals_unconstrained(rng):
    a, b = rng.normal(size=30), rng.normal(size=30)
    assert dtw_distance(a, b, band=30) == dtw_distance(a, b)
    assert dtw_distance(a, b, band=0) == pytest.approx(np.abs(a - b).sum())
    assert dtw_distance(a, b, band=3) >= dtw_distance(a, b)


@settings(max_examples=200, deadline=None)
@given(seqs, seqs)
def test_matches_bruteforce(a, b):
    assert dtw_distance(a, b) == pytest.approx(dtw_bruteforce(a, b), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(seqs, seqs)
def test_symmetric(a, b):
    assert dtw_distance(a, b) == dtw_distance(b, a)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-10, 10), min_size=n, max_size=n),
    st.lists(st.floats(-10, 10), min_size=n, max_size=n))))
def test_bounded_by_identity_path(pair):
    a, b = map(np.array, pair)
    assert dtw_distance(a, b) <= np.abs(a - b).sum() + 1e-9


@settings(max_examples=100, deadline=None)
@given(seqs, seqs, st.floats(-100, 100))
def test_common_shift_invariance(a, b, c):
    shifted = dtw_distance(np.array(a) + c, np.array(b) + c)
    assert shifted == pytest.approx(dtw_distance(a, b), rel=1e-9, abs=1e-9)


def test_matrix_identical_series():
    d = normalize(from_arrays([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]))
    np.testing.assert_array_equal(dtw_matrix(d), np.zeros((2, 2)))


def test_matrix_constant_shift_bound(rng):
    y = rng.normal(size=40)
    c = 0.7
    d = normalize(from_arrays([y, rng.normal(size=40), y + c]))
    m = dtw_matrix(d)
    check_matrix(m)
    scale = d.norm_stats.scale
    assert m[0, 2] <= len(y) * c / scale + 1e-9
    assert m[0, 1] == dtw_distance(d.values[0], d.values[1])


def test_matrix_needs_two_series():
    with pytest.raises(DataError):
        dtw_matrix(normalize(from_arrays([[1.0, 2.0, 4.0]])))


def test_matrix_full_scale():
    from rogue_sensors.simgen import SimConfig, generate

    raw, _ = generate(SimConfig(seed=5))
    m = dtw_matrix(normalize(raw))
    assert m.shape == (63, 63)
    iu = np.triu_indices(63, 1)
    assert iu[0].size == 1953
    assert np.all(np.isfinite(m[iu])) and np.all(m[iu] >= 0)
    check_matrix(m)


def test_cache_roundtrip_and_invalidation(tmp_path, toy_dataset):
    path = tmp_path / "dtw.npy"
    m1, hit1 = cached_dtw_matrix(toy_dataset, path)
    m2, hit2 = cached_dtw_matrix(toy_dataset, path)
    assert (hit1, hit2) == (False, True)
    np.testing.assert_array_equal(m1, m2)
    _, hit3 = cached_dtw_matrix(toy_dataset, path, squared=True)
    assert hit3 is False
    other = normalize(from_arrays([[0.0, 1.0], [2.0, 0.0], [1.0, 1.0, 5.0]]))
    m4, hit4 = cached_dtw_matrix(other, path)
    assert hit4 is False and m4.shape == (3, 3)
