import math

import numpy as np
import pytest

from meeql import abm, mfm
from meeql.inference import (
    InferenceError,
    error_sweep,
    infer_rp,
    sse_objective,
)
from meeql.me_eql import ParameterizedModel, meanfield_model
from meeql.timeseries import TimeSeries

SMALL_ABM = abm.AbmParams(rp=1.0, lattice_side=24, n_replicates=1, seed=7)


def mfm_series(rp):
    return mfm.solve_mfm(mfm.MfmParams(rp=rp))


def explosive_model():
    # dC/dt = 5 C^2 regardless of rp: diverges before the data horizon
    return ParameterizedModel(kind="es", coef_polys={2: np.array([5.0])})


@pytest.mark.parametrize("rp", [0.1, 1.0, 4.0])
def test_meanfield_inverts_its_own_data(rp):
    res = infer_rp(meanfield_model(), mfm_series(rp), rp_true=rp)
    assert res.rp_hat == pytest.approx(rp, rel=1e-4)
    assert res.relative_error < 1e-4
    assert res.model_kind == "meanfield"


def test_relative_error_uses_supplied_truth():
    res = infer_rp(meanfield_model(), mfm_series(2.0), rp_true=2.51)
    assert res.rp_hat == pytest.approx(2.0, rel=1e-3)
    assert res.relative_error == pytest.approx(abs(2.0 - 2.51) / 2.51, abs=1e-3)


def test_truth_read_from_metadata():
    data = abm.simulate(SMALL_ABM)
    res = infer_rp(meanfield_model(), data)
    assert res.rp_true == 1.0


def test_optimum_beats_manual_probes():
    data = mfm_series(1.3)
    obj = sse_objective(meanfield_model(), data)
    res = infer_rp(meanfield_model(), data, rp_true=1.3)
    for probe in (0.5, 1.0, 1.29, 1.31, 2.0, 5.0):
        assert res.sse_at_optimum <= obj(probe)


def test_estimate_respects_bounds():
    res = infer_rp(meanfield_model(), mfm_series(1.0), bounds=(0.01, 0.7), rp_true=1.0)
    assert 0.01 <= res.rp_hat <= 0.7
    assert res.rp_hat == pytest.approx(0.7, rel=1e-3)


def test_objective_is_scale_consistent():
    # doubling rp_true halves the horizon; the same model still fits best
    for rp in (0.5, 1.0, 2.0):
        res = infer_rp(meanfield_model(), mfm_series(rp), rp_true=rp)
        assert res.relative_error < 1e-4


def test_divergent_model_raises():
    with pytest.raises(InferenceError):
        infer_rp(explosive_model(), mfm_series(1.0), rp_true=1.0)


def test_input_validation():
    data = mfm_series(1.0)
    with pytest.raises(ValueError):
        infer_rp(meanfield_model(), data, bounds=(0.0, 1.0), rp_true=1.0)
    with pytest.raises(ValueError):
        infer_rp(meanfield_model(), data, bounds=(2.0, 1.0), rp_true=1.0)
    with pytest.raises(ValueError):
        infer_rp(meanfield_model(), TimeSeries(np.array([0.0]), np.array([0.05])),
                 rp_true=1.0)
    bare = TimeSeries(data.t.copy(), data.c.copy())
    with pytest.raises(ValueError):
        infer_rp(meanfield_model(), bare)


def test_sweep_shape_and_counts():
    cells = error_sweep({"meanfield": meanfield_model()}, [0.51, 1.01], 2, SMALL_ABM)
    assert len(cells) == 2
    assert [c.rp_true for c in cells] == [0.51, 1.01]
    assert all(c.model_kind == "meanfield" for c in cells)
    assert all(c.n == 2 for c in cells)
    assert all(math.isfinite(c.mean_rel_err) for c in cells)
    assert all(c.std_rel_err >= 0.0 for c in cells)


def test_sweep_deterministic():
    args = ({"meanfield": meanfield_model()}, [1.01], 3, SMALL_ABM)
    first = error_sweep(*args)
    second = error_sweep(*args)
    assert [(c.mean_rel_err, c.std_rel_err, c.n) for c in first] == [
        (c.mean_rel_err, c.std_rel_err, c.n) for c in second
    ]


def test_sweep_parallel_matches_serial():
    args = ({"meanfield": meanfield_model()}, [0.51, 1.01], 2, SMALL_ABM)
    serial = error_sweep(*args)
    threaded = error_sweep(*args, jobs=3)
    assert [(c.mean_rel_err, c.n) for c in serial] == [
        (c.mean_rel_err, c.n) for c in threaded
    ]


def test_sweep_drops_failed_inferences():
    models = {"meanfield": meanfield_model(), "broken": explosive_model()}
    cells = error_sweep(models, [1.01], 2, SMALL_ABM)
    by_kind = {c.model_kind: c for c in cells}
    assert by_kind["meanfield"].n == 2
    assert by_kind["broken"].n == 0
    assert math.isnan(by_kind["broken"].mean_rel_err)


def test_sweep_models_see_identical_data():
    # same model registered twice must produce identical cells
    models = {"a": meanfield_model(), "b": meanfield_model()}
    cells = error_sweep(models, [1.01], 2, SMALL_ABM)
    assert cells[0].mean_rel_err == cells[1].mean_rel_err
    assert cells[0].std_rel_err == cells[1].std_rel_err


def test_sweep_validation():
    with pytest.raises(ValueError):
        error_sweep({"meanfield": meanfield_model()}, [], 2, SMALL_ABM)
    with pytest.raises(ValueError):
        error_sweep({"meanfield": meanfield_model()}, [1.0], 0, SMALL_ABM)
