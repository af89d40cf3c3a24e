"""Forward solver for learned polynomial ODEs dC/dt = sum_k xi_k C^k.

The right-hand sides produced by sparse regression are dense polynomials of
degree up to 10; at out-of-sample parameter values they can blow up in finite
time, so the integrator carries an explicit divergence guard that is reported
separately from ordinary step failure. Callers in the learning/evaluation
pipelines translate divergence into an infinite sum of squared errors rather
than aborting.

The stepper is an embedded Dormand-Prince 4(5) pair with the standard
fourth-order continuous extension for sampling onto the caller's grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .timeseries import TimeSeries

MAX_DEGREE = 10

# Defaults per the solver contract: relative 1e-8, absolute 1e-10, and a hard
# |C| bound distinguishing "model invalid here" from a solver breakdown.
DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
DEFAULT_C_MAX = 10.0


class OdeError(Exception):
    """Base class for integration failures."""


class OdeDivergenceError(OdeError):
    """|C| exceeded the divergence bound; the model is invalid on this run."""


class OdeStepError(OdeError):
    """Step size underflowed before reaching the end of the grid."""


@dataclass
class PolynomialOde:
    """dC/dt = rp_scale * sum_k coefficients[k] * C^k, degrees in [1, 10].

    ``rp_scale`` is the multiplicative proliferation-rate factor used by
    embedded-library models; ``None`` means 1.
    """

    coefficients: dict[int, float]
    rp_scale: float | None = None

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("polynomial ODE needs at least one term")
        for deg, coef in self.coefficients.items():
            if not (1 <= int(deg) <= MAX_DEGREE):
                raise ValueError(f"term degree {deg} outside [1, {MAX_DEGREE}]")
            if not np.isfinite(coef):
                raise ValueError(f"non-finite coefficient for degree {deg}")
        if not any(c != 0.0 for c in self.coefficients.values()):
            raise ValueError("polynomial ODE must have a nonzero coefficient")
        if self.rp_scale is not None and not np.isfinite(self.rp_scale):
            raise ValueError("non-finite rp_scale")

    def dense_coefficients(self) -> np.ndarray:
        """Coefficient array indexed by degree (index 0 unused, set to 0)."""
        top = max(self.coefficients)
        out = np.zeros(top + 1)
        for deg, coef in self.coefficients.items():
            out[deg] = coef
        return out

    def scale(self) -> float:
        return 1.0 if self.rp_scale is None else float(self.rp_scale)


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = (3 / 40, 9 / 40)
_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_B = _A[6].copy()  # 5th-order weights (FSAL)
# Error weights: 5th-order minus embedded 4th-order solution.
_E = np.array(
    [
        71 / 57600,
        0.0,
        -71 / 16695,
        71 / 1920,
        -17253 / 339200,
        22 / 525,
        -1 / 40,
    ]
)
# Fourth-order continuous extension: y(t0 + s*h) = y0 + h * sum_i k_i * P_i(s),
# with P_i(s) = sum_j P[i, j] * s^(j+1).
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_STEP_FAILED = 2


@njit(cache=True, nogil=True)
def _poly_rhs(coefs, scale, c):
    # Horner evaluation of c*(xi_1 + c*(xi_2 + ...)) * scale.
    acc = 0.0
    for k in range(coefs.shape[0] - 1, 0, -1):
        acc = (acc + coefs[k]) * c
    return scale * acc


@njit(cache=True, nogil=True)
def _dp45_poly(coefs, scale, c0, t_grid, rtol, atol, c_max, a, b, cn, e, p, out):
    n_grid = t_grid.shape[0]
    t = t_grid[0]
    t_end = t_grid[n_grid - 1]
    y = c0
    out[0] = c0
    gi = 1
    if abs(y) > c_max:
        return STATUS_DIVERGED

    k = np.zeros(7)
    f0 = _poly_rhs(coefs, scale, y)
    # Initial step: conservative fraction of the span, shrunk if the slope
    # would move the state by more than the tolerance-scaled magnitude.
    span = t_end - t
    h = 0.01 * span
    sc = atol + rtol * abs(y)
    if abs(f0) > 0.0:
        h_rhs = 0.01 * sc / abs(f0)
        if h_rhs < h:
            h = h_rhs
    if h <= 0.0:
        return STATUS_STEP_FAILED

    min_factor = 0.2
    max_factor = 10.0
    safety = 0.9

    while gi < n_grid:
        if h < 1e-14 * max(abs(t), 1.0):
            return STATUS_STEP_FAILED
        if t + h > t_end:
            h = t_end - t

        k[0] = f0
        diverged = False
        for s in range(1, 7):
            acc = 0.0
            for j in range(s):
                acc += a[s, j] * k[j]
            ys = y + h * acc
            if not np.isfinite(ys) or abs(ys) > 100.0 * c_max:
                diverged = True
                break
            k[s] = _poly_rhs(coefs, scale, ys)
        if diverged:
            # Implausibly large internal stage: retry smaller before declaring
            # divergence so a too-bold step is not mistaken for blow-up.
            h *= 0.5
            if h < 1e-14 * max(abs(t), 1.0):
                return STATUS_DIVERGED
            continue

        y_new = y
        for s in range(7):
            y_new += h * b[s] * k[s]
        err = 0.0
        for s in range(7):
            err += e[s] * k[s]
        err *= h
        sc = atol + rtol * max(abs(y), abs(y_new))
        err_norm = abs(err) / sc

        if err_norm <= 1.0:
            # Accepted: sample every grid point inside (t, t+h].
            t_new = t + h
            while gi < n_grid and t_grid[gi] <= t_new + 1e-12 * max(abs(t_new), 1.0):
                s_frac = (t_grid[gi] - t) / h
                acc = 0.0
                for i in range(7):
                    poly = 0.0
                    for j in range(3, -1, -1):
                        poly = (poly + p[i, j]) * s_frac
                    acc += k[i] * poly
                out[gi] = y + h * acc
                gi += 1
            y = y_new
            t = t_new
            if abs(y) > c_max:
                return STATUS_DIVERGED
            f0 = k[6]  # FSAL
            if err_norm == 0.0:
                factor = max_factor
            else:
                factor = safety * err_norm ** -0.2
                if factor > max_factor:
                    factor = max_factor
            h *= factor
        else:
            factor = safety * err_norm ** -0.2
            if factor < min_factor:
                factor = min_factor
            h *= factor
    return STATUS_OK


def integrate(
    ode: PolynomialOde,
    c0: float,
    t_grid: np.ndarray,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    c_max: float = DEFAULT_C_MAX,
) -> TimeSeries:
    """Solve the polynomial ODE from ``c0`` and sample it on ``t_grid``.

    Raises OdeDivergenceError when |C| exceeds ``c_max`` (finite-time blow-up
    of an invalid learned model) and OdeStepError on step-size underflow.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2:
        raise ValueError("t_grid must be 1-D with at least two points")
    if not np.all(np.diff(t_grid) > 0):
        raise ValueError("t_grid must be strictly increasing")
    if not np.isfinite(c0):
        raise ValueError("c0 must be finite")

    out = np.empty(t_grid.size)
    status = _dp45_poly(
        ode.dense_coefficients(),
        ode.scale(),
        float(c0),
        t_grid,
        float(rtol),
        float(atol),
        float(c_max),
        _A,
        _B,
        _C,
        _E,
        _P,
        out,
    )
    if status == STATUS_DIVERGED:
        raise OdeDivergenceError(f"|C| exceeded {c_max} while integrating {ode.coefficients}")
    if status == STATUS_STEP_FAILED:
        raise OdeStepError(f"step size underflow while integrating {ode.coefficients}")
    return TimeSeries(t_grid.copy(), out)


def try_predict(
    coefficients: dict[int, float],
    c0: float,
    t_grid: np.ndarray,
    rp_scale: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    c_max: float = DEFAULT_C_MAX,
) -> np.ndarray | None:
    """Forward-solve a coefficient map, or None when the solve fails.

    An empty or all-zero coefficient map means dC/dt = 0 and yields the
    constant trajectory at c0. Learning and inference loops use the None
    return to score a candidate model as infinitely bad instead of aborting.
    """
    active = {k: v for k, v in coefficients.items() if v != 0.0}
    if not active:
        return np.full(np.asarray(t_grid).size, float(c0))
    try:
        return integrate(PolynomialOde(active, rp_scale), c0, t_grid, rtol, atol, c_max).c
    except OdeError:
        return None
