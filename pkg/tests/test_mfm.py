import math

import numpy as np
import pytest

from meeql import mfm

LOGISTIC_RP1_C005_T2 = 0.11598465834203696  # closed form, frozen


def test_rhs_extinction_fixed_point():
    assert mfm.mfm_rhs(0.0, 1.0) == 0.0


def test_rhs_carrying_capacity_fixed_point():
    assert mfm.mfm_rhs(0.5, 3.0) == 0.0


def test_rhs_direct_substitution():
    assert mfm.mfm_rhs(0.05, 0.1) == pytest.approx(0.00225, rel=1e-12)


def test_solve_starts_at_initial_condition():
    ts = mfm.solve_mfm(mfm.MfmParams(rp=1.0, c0=0.05))
    assert ts.c[0] == pytest.approx(0.05, abs=1e-12)


def test_solve_reaches_carrying_capacity():
    ts = mfm.solve_mfm(mfm.MfmParams(rp=1.0, c0=0.05))
    assert ts.c[-1] == pytest.approx(0.5, abs=1e-5)


def test_solve_matches_frozen_logistic_value():
    ts = mfm.solve_mfm(mfm.MfmParams(rp=1.0, c0=0.05, t_end=2.0, n_points=5))
    assert ts.c[-1] == pytest.approx(LOGISTIC_RP1_C005_T2, abs=1e-9)


def test_numeric_solver_agrees_with_closed_form():
    params = mfm.MfmParams(rp=1.0, c0=0.05)
    numeric = mfm.solve_mfm(params, closed_form=False)
    exact = mfm.logistic_solution(params.grid(), 1.0, 0.05)
    assert np.max(np.abs(numeric.c - exact)) < 1e-7


def test_default_horizon_is_30_over_rp():
    assert mfm.MfmParams(rp=0.5).t_end == pytest.approx(60.0)
    assert mfm.MfmParams(rp=2.0).grid()[-1] == pytest.approx(15.0)


@pytest.mark.parametrize("c0,increasing", [(0.05, True), (0.8, False)])
def test_monotone_toward_equilibrium(c0, increasing):
    ts = mfm.solve_mfm(mfm.MfmParams(rp=1.5, c0=c0))
    diffs = np.diff(ts.c)
    assert np.all(diffs > 0) if increasing else np.all(diffs < 0)


def test_trajectory_stays_in_bounds():
    for c0 in (0.05, 0.25, 0.8):
        ts = mfm.solve_mfm(mfm.MfmParams(rp=2.0, c0=c0))
        assert np.all(ts.c > 0)
        assert np.all(ts.c < max(c0, 0.5) + 1e-9)


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        mfm.MfmParams(rp=0.0)
    with pytest.raises(ValueError):
        mfm.MfmParams(rp=1.0, c0=1.5)
    with pytest.raises(ValueError):
        mfm.MfmParams(rp=1.0, n_points=1)


def test_zero_noise_returns_equal_values():
    ts = mfm.solve_mfm(mfm.MfmParams(rp=1.0))
    noisy = mfm.add_noise(ts, 0.0, np.random.default_rng(0))
    assert np.array_equal(noisy.c, ts.c)


def test_noise_scale_tracks_trajectory_mean():
    # constant series at 0.5: sample std of the perturbation ~ 0.5 * sigma
    t = np.linspace(0.0, 1.0, 20000)
    from meeql.timeseries import TimeSeries

    ts = TimeSeries(t, np.full(t.size, 0.5))
    noisy = mfm.add_noise(ts, 0.0025, np.random.default_rng(3))
    spread = float(np.std(noisy.c - 0.5))
    assert spread == pytest.approx(0.5 * 0.0025, rel=0.1)


def test_noise_amplitude_linear_in_sigma():
    ts = mfm.solve_mfm(mfm.MfmParams(rp=1.0))
    lo = mfm.add_noise(ts, 0.001, np.random.default_rng(11))
    hi = mfm.add_noise(ts, 0.002, np.random.default_rng(11))
    assert np.allclose(hi.c - ts.c, 2.0 * (lo.c - ts.c))


def test_noise_deterministic_for_fixed_seed():
    ts = mfm.solve_mfm(mfm.MfmParams(rp=1.0))
    a = mfm.add_noise(ts, 0.0025, np.random.default_rng(42))
    b = mfm.add_noise(ts, 0.0025, np.random.default_rng(42))
    assert np.array_equal(a.c, b.c)
    assert np.array_equal(a.t, ts.t)


def test_logistic_solution_limit():
    far = mfm.logistic_solution(np.array([0.0, 1e6]), 1.0, 0.05)
    assert far[-1] == pytest.approx(0.5, abs=1e-12)
    assert math.isclose(far[0], 0.05)
