import math

import numpy as np
import pytest

from meeql.optimize import minimize_scalar_logscan, nelder_mead


def test_quadratic_bowl():
    res = nelder_mead(lambda x: (x[0] - 3.0) ** 2 + (x[1] + 1.0) ** 2,
                      np.array([0.0, 0.0]))
    assert res.converged
    assert np.allclose(res.x, [3.0, -1.0], atol=1e-5)
    assert res.fun == pytest.approx(0.0, abs=1e-10)


def test_rosenbrock_two_dim():
    def f(x):
        return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2

    res = nelder_mead(f, np.array([-1.2, 1.0]))
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_accepted_steps_never_increase_best():
    best = [math.inf]
    trail = []

    def f(x):
        v = float(np.sum(x * x))
        trail.append(v)
        return v

    res = nelder_mead(f, np.array([2.0, -3.0, 1.0]))
    assert res.fun <= min(trail) + 1e-15


def test_infinite_region_is_avoided():
    def f(x):
        if abs(x[0]) > 1.5:
            return math.inf
        return (x[0] - 1.0) ** 2

    res = nelder_mead(f, np.array([0.5]))
    assert res.x[0] == pytest.approx(1.0, abs=1e-6)


def test_empty_start_rejected():
    with pytest.raises(ValueError):
        nelder_mead(lambda x: 0.0, np.array([]))


def test_logscan_finds_scalar_minimum():
    res = minimize_scalar_logscan(lambda x: (math.log(x)) ** 2, 1e-3, 10.0)
    assert res.x == pytest.approx(1.0, rel=1e-6)


def test_logscan_never_worse_than_scan_points():
    def f(x):
        return (x - 2.0) ** 2 + 0.1 * math.sin(40 * x)

    res = minimize_scalar_logscan(f, 0.01, 6.0)
    xs = np.logspace(math.log10(0.01), math.log10(6.0), 50)
    assert res.fun <= min(f(float(x)) for x in xs) + 1e-12


def test_logscan_rejects_all_infinite():
    with pytest.raises(ValueError):
        minimize_scalar_logscan(lambda x: math.inf, 0.1, 1.0)


def test_logscan_bound_validation():
    with pytest.raises(ValueError):
        minimize_scalar_logscan(lambda x: x, 0.0, 1.0)
    with pytest.raises(ValueError):
        minimize_scalar_logscan(lambda x: x, 2.0, 1.0)
