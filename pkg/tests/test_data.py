import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rogue_sensors.data import (
    Dataset, SensorSeries, denormalize, from_arrays, load_csv, normalize, read_dataset, save_dataset,
)
from rogue_sensors.errors import DataError, DegenerateDatasetError

H4 = 4 * 3600


def write(path, rows, header="sensor_id,timestamp,value"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def test_three_rows_one_sensor(tmp_path):
    p = write(tmp_path / "a.csv", [
        "s1,2007-04-01T00:00:00,-10", "s1,2007-04-01T04:00:00,-20", "s1,2007-04-01T08:00:00,-30"])
    d = load_csv(p)
    assert len(d) == 1 and len(d.series[0]) == 3
    np.testing.assert_array_equal(d.series[0].values, [-10, -20, -30])
    assert d.normalized is False


def test_two_sensors_full_season_epoch(tmp_path):
    start = 1175385600  # 2007-04-01 UTC
    rows = [f"{sid},{start + k * H4},{-k * 0.1}" for sid in ("b", "a") for k in range(884)]
    d = load_csv(write(tmp_path / "b.csv", rows))
    assert len(d) == 2 and [len(s) for s in d.series] == [884, 884]


def test_rows_sorted_per_sensor(tmp_path):
    rows = ["s,8,3", "s,0,1", "s,4,2"]
    d = load_csv(write(tmp_path / "c.csv", rows), cadence_seconds=4)
    np.testing.assert_array_equal(d.series[0].values, [1, 2, 3])
    np.testing.assert_array_equal(d.series[0].timestamps, [0, 4, 8])


def test_duplicate_timestamp(tmp_path):
    p = write(tmp_path / "d.csv", ["s,2007-04-01T00:00:00,-1", "s,2007-04-01T04:00:00,-2", "s,2007-04-01T04:00:00,-3"])
    with pytest.raises(DataError, match="duplicate"):
        load_csv(p)


def test_unparseable_row_reports_line(tmp_path):
    p = write(tmp_path / "e.csv", ["s,2007-04-01T00:00:00,-1", "s,not-a-date,-2"])
    with pytest.raises(DataError, match="line 3"):
        load_csv(p)
    p = write(tmp_path / "f.csv", ["s,2007-04-01T00:00:00,-1", "s,2007-04-01T04:00:00,abc"])
    with pytest.raises(DataError, match="line 3"):
        load_csv(p)


def test_mixed_timestamp_formats_rejected(tmp_path):
    p = write(tmp_path / "g.csv", ["s,0,-1", "s,2007-04-01T04:00:00,-2"])
    with pytest.raises(DataError, match="line 3"):
        load_csv(p)


def test_short_gap_interpolated(tmp_path):
    rows = ["s,0,0", "s,1,", "s,3,3", "s,4,4"]  # slot 1 blank, slot 2 absent
    d = load_csv(write(tmp_path / "h.csv", rows), cadence_seconds=1)
    np.testing.assert_allclose(d.series[0].values, [0, 1, 2, 3, 4])


def test_long_gap_names_sensor(tmp_path):
    rows = ["ok,0,0", "ok,1,1", "bad,0,0", "bad,4,4"]
    with pytest.raises(DataError, match="bad"):
        load_csv(write(tmp_path / "i.csv", rows), cadence_seconds=1)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv")


def test_normalize_hand_values():
    d = normalize(from_arrays([[1.0, 2.0, 3.0]]))
    assert d.norm_stats.mean == 2.0
    assert d.norm_stats.scale == pytest.approx(math.sqrt(2 / 3), rel=1e-15)
    assert d.series[0].values[0] == pytest.approx(-1.224744871391589, rel=1e-12)
    assert d.normalized


def test_normalize_variance_mode():
    d = normalize(from_arrays([[1.0, 2.0, 3.0]]), scale="variance")
    assert d.norm_stats.scale == pytest.approx(2 / 3)
    assert d.series[0].values[0] == pytest.approx(-1.5)


def test_normalize_degenerate():
    with pytest.raises(DegenerateDatasetError):
        normalize(from_arrays([[4.0, 4.0], [4.0, 4.0, 4.0]]))


def test_normalize_identity_on_standardized(rng):
    x = rng.normal(size=(3, 50))
    x = (x - x.mean()) / x.std()
    d = normalize(from_arrays(x))
    for s, row in zip(d.series, x):
        np.testing.assert_allclose(s.values, row, atol=1e-12)


def test_normalize_twice_rejected(toy_dataset):
    with pytest.raises(DataError):
        normalize(toy_dataset)


series_lists = st.lists(
    st.lists(st.floats(-300, 50, allow_nan=False), min_size=2, max_size=30), min_size=1, max_size=5
).filter(lambda vs: np.var(np.concatenate([np.array(v) for v in vs])) > 1e-6)


@settings(max_examples=100, deadline=None)
@given(series_lists, st.sampled_from(["std", "variance"]))
def test_normalize_properties(vals, mode):
    raw = from_arrays(vals)
    d = normalize(raw, scale=mode)
    pooled = np.concatenate(d.values)
    assert abs(pooled.mean()) < 1e-9
    if mode == "std":
        assert pooled.std() == pytest.approx(1.0, rel=1e-9)
    back = denormalize(d)
    for a, b in zip(back.values, raw.values):
        np.testing.assert_allclose(a, b, atol=1e-9 * max(1.0, np.abs(b).max()))
    # increasing affine map: order is kept (ties may appear through rounding)
    order = np.argsort(np.concatenate(raw.values), kind="stable")
    assert np.all(np.diff(pooled[order]) >= 0)


def test_series_invariants():
    with pytest.raises(DataError):
        SensorSeries("x", [0, 0], [1.0, 2.0])
    with pytest.raises(DataError):
        SensorSeries("x", [0, 1], [1.0, np.nan])
    with pytest.raises(DataError):
        Dataset(())


def test_save_read_roundtrip_and_determinism(tmp_path, small_fleet):
    d, _ = small_fleet
    save_dataset(d, tmp_path / "one.csv")
    save_dataset(d, tmp_path / "two.csv")
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()
    back = read_dataset(tmp_path / "one.csv")
    assert back.content_hash() == d.content_hash()
    assert load_csv(tmp_path / "one.csv").content_hash() == load_csv(tmp_path / "two.csv").content_hash()
