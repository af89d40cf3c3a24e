import numpy as np
import pytest

from meeql import mfm
from meeql.me_eql import ExperimentSet


def make_mfm_set(rp_values, sigma=0.0, seed=0, n_points=100, c0=0.05):
    """Noisy or noise-free logistic experiments with per-experiment rngs."""
    experiments = []
    for j, rp in enumerate(rp_values):
        ts = mfm.solve_mfm(mfm.MfmParams(rp=rp, c0=c0, n_points=n_points))
        if sigma > 0:
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j,)))
            ts = mfm.add_noise(ts, sigma, rng)
        experiments.append((rp, ts))
    return ExperimentSet(experiments, ic=c0, source="mfm")


@pytest.fixture(scope="session")
def mfm_pair():
    return make_mfm_set([0.51, 1.01])


@pytest.fixture(autouse=True)
def _isolated_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("MEEQL_OUTPUT_ROOT", str(tmp_path / "out"))
