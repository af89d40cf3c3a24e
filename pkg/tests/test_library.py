import numpy as np
import pytest

from meeql.library import DesignMatrix, LibrarySpec, build_theta, powers
from meeql.timeseries import TimeSeries, uniform_grid


def one_series(values):
    values = np.asarray(values, dtype=float)
    return TimeSeries(uniform_grid(1.0, values.size), values)


def test_powers_row():
    theta = powers(np.array([0.5]), 3)
    assert np.allclose(theta[0], [0.5, 0.25, 0.125])


def test_embedded_row_scaled_by_rp():
    dm = build_theta([(2.0, one_series([0.5, 0.5]))],
                     LibrarySpec(max_degree=2, embed_rp=True))
    assert np.allclose(dm.theta[0], [1.0, 0.5])


def test_zero_density_row_is_zero():
    dm = build_theta([(1.0, one_series([0.0, 0.3]))], LibrarySpec(max_degree=4))
    assert np.all(dm.theta[0] == 0.0)


def test_columns_are_elementwise_powers_of_first():
    c = np.linspace(0.05, 0.5, 17)
    dm = build_theta([(1.0, one_series(c))], LibrarySpec(max_degree=10))
    for k in range(1, 11):
        assert np.allclose(dm.theta[:, k - 1], dm.theta[:, 0] ** k)


def test_embedded_equals_plain_scaled_per_block():
    a, b = one_series([0.1, 0.2, 0.3]), one_series([0.4, 0.5, 0.6])
    spec = LibrarySpec(max_degree=5, embed_rp=True)
    dm = build_theta([(0.5, a), (2.5, b)], spec)
    pa = build_theta([(0.5, a)], LibrarySpec(max_degree=5)).theta
    pb = build_theta([(2.5, b)], LibrarySpec(max_degree=5)).theta
    assert np.allclose(dm.theta[dm.rows_of(0)], 0.5 * pa)
    assert np.allclose(dm.theta[dm.rows_of(1)], 2.5 * pb)
    assert dm.n_rows == 6


def test_stacking_keeps_input_order():
    a, b = one_series([0.1, 0.2]), one_series([0.7, 0.8])
    dm = build_theta([(1.0, a), (2.0, b)], LibrarySpec(max_degree=1, embed_rp=True))
    assert np.allclose(dm.theta[:, 0], [0.1, 0.2, 1.4, 1.6])
    assert dm.rp_values == [1.0, 2.0]


def test_labels_are_degree_ascending():
    dm = build_theta([(1.0, one_series([0.2, 0.3]))], LibrarySpec(max_degree=4))
    assert [lab.degree for lab in dm.column_labels] == [1, 2, 3, 4]
    assert dm.n_terms == 4


def test_plain_library_rejects_multiple_experiments():
    a, b = one_series([0.1, 0.2]), one_series([0.3, 0.4])
    with pytest.raises(ValueError):
        build_theta([(1.0, a), (2.0, b)], LibrarySpec(embed_rp=False))


def test_empty_data_rejected():
    with pytest.raises(ValueError):
        build_theta([], LibrarySpec())


def test_degree_bounds_enforced():
    with pytest.raises(ValueError):
        LibrarySpec(max_degree=0)
    with pytest.raises(ValueError):
        LibrarySpec(max_degree=11)
