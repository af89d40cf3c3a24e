import numpy as np
import pytest

from meeql.numderiv import (
    DerivativeOptions,
    abm_options,
    default_smooth_window,
    differentiate,
    mfm_options,
    moving_mean,
)
from meeql.timeseries import TimeSeries, uniform_grid

CENTRAL = DerivativeOptions(scheme="central", smooth_window=0)
FORWARD = DerivativeOptions(scheme="forward", smooth_window=0)


def series(f, t_end=1.0, n=101):
    t = uniform_grid(t_end, n)
    return TimeSeries(t, f(t))


def test_central_exact_for_linear():
    d = differentiate(series(lambda t: 2.0 * t), CENTRAL)
    assert np.allclose(d.c, 2.0, atol=1e-12)


def test_central_exact_for_quadratic_interior():
    t = np.arange(7.0)
    d = differentiate(TimeSeries(t, t**2), CENTRAL)
    assert d.c[3] == pytest.approx(6.0, abs=1e-12)


def test_central_sine_matches_cosine():
    t = uniform_grid(1.0, 101)  # spacing 0.01
    d = differentiate(TimeSeries(t, np.sin(t)), CENTRAL)
    assert np.max(np.abs(d.c[1:-1] - np.cos(t)[1:-1])) < 1e-4


def test_central_empirical_order_at_least_two():
    errs = []
    for n in (101, 201):
        t = uniform_grid(1.0, n)
        d = differentiate(TimeSeries(t, np.sin(t)), CENTRAL)
        errs.append(np.max(np.abs(d.c[1:-1] - np.cos(t)[1:-1])))
    order = np.log(errs[0] / errs[1]) / np.log(2.0)
    assert order >= 1.9


def test_linearity():
    t = uniform_grid(2.0, 60)
    x = TimeSeries(t, np.sin(t))
    y = TimeSeries(t, t**3)
    combo = TimeSeries(t, 2.5 * x.c + 0.5 * y.c)
    lhs = differentiate(combo, CENTRAL).c
    rhs = 2.5 * differentiate(x, CENTRAL).c + 0.5 * differentiate(y, CENTRAL).c
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_forward_duplicates_last_point():
    t = np.arange(5.0)
    d = differentiate(TimeSeries(t, t**2), FORWARD)
    assert np.allclose(d.c[:-1], np.diff(t**2))
    assert d.c[-1] == d.c[-2]


def test_smoothing_preserves_constants():
    t = uniform_grid(1.0, 50)
    d = differentiate(TimeSeries(t, 3.0 * t),
                      DerivativeOptions(scheme="central", smooth_window=7))
    assert np.allclose(d.c, 3.0, atol=1e-12)


def test_moving_mean_truncates_at_boundaries():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    sm = moving_mean(x, 3)
    assert sm[0] == pytest.approx(1.5)  # only two samples in the window
    assert sm[2] == pytest.approx(3.0)
    assert sm[-1] == pytest.approx(4.5)


def test_default_window_rule():
    assert default_smooth_window(100) == 5
    assert default_smooth_window(40) == 5
    assert default_smooth_window(300) == 15
    assert default_smooth_window(290) == 15  # rounds to 14, forced odd
    assert default_smooth_window(300) % 2 == 1


def test_source_presets():
    assert mfm_options() == DerivativeOptions(scheme="central", smooth_window=0)
    opts = abm_options(100)
    assert opts.scheme == "forward"
    assert opts.smooth_window == 5


def test_option_validation():
    with pytest.raises(ValueError):
        DerivativeOptions(scheme="spectral")
    with pytest.raises(ValueError):
        DerivativeOptions(scheme="central", smooth_window=4)
    with pytest.raises(ValueError):
        DerivativeOptions(scheme="central", smooth_window=1)


def test_input_validation():
    t = uniform_grid(1.0, 30)
    with pytest.raises(ValueError):
        differentiate(TimeSeries(t[:2], np.zeros(2)), CENTRAL)
    bad = TimeSeries(np.array([0.0, 1.0, 3.0, 7.0]), np.zeros(4))
    with pytest.raises(ValueError):
        differentiate(bad, CENTRAL)
