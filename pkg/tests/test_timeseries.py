import numpy as np
import pytest

from meeql.timeseries import TimeSeries, read_csv, uniform_grid, write_csv


def test_uniform_grid_endpoints_and_spacing():
    g = uniform_grid(30.0, 100)
    assert g[0] == 0.0
    assert g[-1] == pytest.approx(30.0)
    assert np.allclose(np.diff(g), g[1] - g[0])


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 1.0]), np.array([1.0]))


def test_non_increasing_times_rejected():
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 2.0, 1.0]), np.zeros(3))


def test_is_uniform_detects_stretched_grid():
    t = np.array([0.0, 1.0, 2.0, 4.0])
    assert not TimeSeries(t, np.zeros(4)).is_uniform()
    assert TimeSeries(uniform_grid(5.0, 50), np.zeros(50)).is_uniform()


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(7)
    ts = TimeSeries(uniform_grid(3.0, 40), rng.random(40) * 1e-3 + 1 / 3)
    path = tmp_path / "series.csv"
    write_csv(ts, path)
    back = read_csv(path)
    assert path.read_text().splitlines()[0] == "t,C"
    assert np.array_equal(back.t, ts.t)
    assert np.array_equal(back.c, ts.c)


def test_copy_is_independent():
    ts = TimeSeries(uniform_grid(1.0, 10), np.ones(10))
    dup = ts.copy()
    dup.c[0] = 5.0
    assert ts.c[0] == 1.0
