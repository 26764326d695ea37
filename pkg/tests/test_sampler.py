import numpy as np
import pytest
from scipy.stats import chisquare

from rogue_sensors.data import from_arrays, normalize
from rogue_sensors.dtw import dtw_matrix
from rogue_sensors.errors import ConfigError
from rogue_sensors.sampler import furthest_neighbors, sample_triplet, write_triplets_csv

M = np.array([[0, 1, 5], [1, 0, 2], [5, 2, 0]], dtype=float)


def test_furthest_neighbors_examples():
    assert furthest_neighbors(M, 0, 1) == [2]
    assert furthest_neighbors(M, 0, 2) == [2, 1]
    flat = np.ones((3, 3)) - np.eye(3)
    assert furthest_neighbors(flat, 0, 2) == [1, 2]
    with pytest.raises(ConfigError):
        furthest_neighbors(M, 0, 3)


@pytest.fixture
def three():
    d = normalize(from_arrays([np.sin(np.arange(30)), np.cos(np.arange(25)), np.arange(20) / 5.0]))
    return d, dtw_matrix(d)


def test_k_equals_n_minus_one_uses_all_others(three):
    d, m = three
    t = sample_triplet(d, 0, m, 2, np.random.default_rng(0))
    assert sorted(s.series for s in t.negatives) == [1, 2]


def test_length_one_series_collapses():
    d = normalize(from_arrays([[0.5], [1.0, 2.0, 3.0], [4.0, 0.0]]))
    m = dtw_matrix(d)
    t = sample_triplet(d, 0, m, 2, np.random.default_rng(1))
    assert t.anchor == t.positive
    assert (t.anchor.offset, t.anchor.length) == (0, 1)


def test_deterministic_under_seed(three):
    d, m = three
    a = sample_triplet(d, 1, m, 2, np.random.default_rng(42))
    b = sample_triplet(d, 1, m, 2, np.random.default_rng(42))
    assert a == b and repr(a) == repr(b)


def test_fuzz_invariants_and_support(small_fleet):
    d, _ = small_fleet
    m = dtw_matrix(d)
    rng = np.random.default_rng(7)
    k = 4
    i = 2
    neigh = furthest_neighbors(m, i, k)
    seen = set()
    for _ in range(10_000):
        t = sample_triplet(d, i, m, k, rng)
        t.check(d, neigh)
        assert [s.series for s in t.negatives] == neigh
        seen.update(s.series for s in t.negatives)
    assert seen == set(neigh)


def test_anchor_length_uniform_given_positive():
    s_i = 6
    d = normalize(from_arrays([np.arange(s_i, dtype=float), np.ones(4), np.zeros(3) - 1]))
    m = dtw_matrix(d)
    rng = np.random.default_rng(11)
    counts = {sp: np.zeros(s_i + 1, dtype=int) for sp in range(1, s_i + 1)}
    for _ in range(10_000):
        t = sample_triplet(d, 0, m, 1, rng)
        assert t.positive.length <= t.anchor.length
        counts[t.positive.length][t.anchor.length] += 1
    for sp, row in counts.items():
        obs = row[sp:]
        if obs.size > 1:
            assert chisquare(obs).pvalue > 0.01, (sp, obs)
    pos_marginal = np.array([counts[sp].sum() for sp in range(1, s_i + 1)])
    assert chisquare(pos_marginal).pvalue > 0.01


def test_random_baseline_mode(three):
    d, _ = three
    t = sample_triplet(d, 0, None, 1, np.random.default_rng(3), negative_mode="random")
    assert t.negatives[0].series in (1, 2)
    with pytest.raises(ConfigError):
        sample_triplet(d, 0, None, 1, np.random.default_rng(3))


def test_debug_dump(tmp_path, three):
    d, m = three
    t = sample_triplet(d, 0, m, 2, np.random.default_rng(0))
    write_triplets_csv([(1, t)], tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("step,i,anchor_offset")
    assert len(lines) == 2
