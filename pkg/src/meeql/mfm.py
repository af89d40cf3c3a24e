"""Mean-field birth-death-migration model.

With death rate fixed at half the proliferation rate the mean-field density
obeys the logistic equation dC/dt = (rp/2) C - rp C^2, whose carrying
capacity is 1/2. Trajectories are available both in closed form and through
the generic polynomial-ODE integrator; the closed form serves as an oracle
for the solver and is what data generation uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ode
from .timeseries import TimeSeries, uniform_grid

DEFAULT_C0 = 0.05
DEFAULT_N_POINTS = 100
DEFAULT_SIGMA = 0.0025
CARRYING_CAPACITY = 0.5


def default_t_end(rp: float) -> float:
    """Simulation horizon 30/rp, which spans the logistic transient."""
    return 30.0 / rp


@dataclass
class MfmParams:
    """Mean-field run settings. t_end defaults to 30/rp when omitted."""

    rp: float
    c0: float = DEFAULT_C0
    t_end: float | None = None
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self):
        if not (self.rp > 0):
            raise ValueError("rp must be positive")
        if not (0 < self.c0 < 1):
            raise ValueError("c0 must lie in (0, 1)")
        if self.t_end is None:
            self.t_end = default_t_end(self.rp)
        if not (self.t_end > 0):
            raise ValueError("t_end must be positive")
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")

    def grid(self) -> np.ndarray:
        return uniform_grid(self.t_end, self.n_points)


def mfm_ode(rp: float) -> ode.PolynomialOde:
    """The logistic right-hand side (rp/2) C - rp C^2 as a polynomial ODE."""
    if not (rp > 0):
        raise ValueError("rp must be positive")
    return ode.PolynomialOde({1: 0.5 * rp, 2: -rp})


def mfm_rhs(c: np.ndarray | float, rp: float) -> np.ndarray | float:
    return 0.5 * rp * c - rp * np.square(c)


def logistic_solution(t: np.ndarray, rp: float, c0: float) -> np.ndarray:
    """Closed-form C(t) = K / (1 + (K/c0 - 1) exp(-rp t / 2)), K = 1/2."""
    t = np.asarray(t, dtype=float)
    k = CARRYING_CAPACITY
    return k / (1.0 + (k / c0 - 1.0) * np.exp(-0.5 * rp * t))


def solve_mfm(params: MfmParams, closed_form: bool = True) -> TimeSeries:
    """Mean-field trajectory on the uniform grid.

    closed_form=False integrates numerically instead, which exercises the
    same solver used for learned models.
    """
    t = params.grid()
    meta = {"rp": params.rp, "c0": params.c0, "source": "mfm"}
    if closed_form:
        return TimeSeries(t, logistic_solution(t, params.rp, params.c0), meta)
    ts = ode.integrate(mfm_ode(params.rp), params.c0, t)
    ts.meta.update(meta)
    return ts


def add_noise(ts: TimeSeries, sigma: float, rng: np.random.Generator) -> TimeSeries:
    """Additive Gaussian noise scaled by the trajectory mean.

    C_d(t) = C(t) + mean(C) * eps, eps ~ N(0, sigma). The draw happens even
    for sigma = 0 so seeded streams advance identically across noise levels.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    eps = rng.standard_normal(ts.n)
    noisy = ts.c + ts.c.mean() * sigma * eps
    meta = dict(ts.meta)
    meta["sigma"] = sigma
    return TimeSeries(ts.t.copy(), noisy, meta)
