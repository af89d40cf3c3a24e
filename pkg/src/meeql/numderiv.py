"""Derivative estimation from sampled trajectories.

Smooth model data takes central differences; stochastic ensemble data takes
forward differences followed by a centered moving mean, since raw forward
differences of a piecewise-constant density trace are dominated by jump
noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries

SCHEMES = ("central", "forward")


def default_smooth_window(n_points: int) -> int:
    """Moving-mean window for stochastic data: max(5, n/20), forced odd."""
    w = max(5, int(round(n_points / 20)))
    if w % 2 == 0:
        w += 1
    return w


@dataclass(frozen=True)
class DerivativeOptions:
    scheme: str = "central"
    smooth_window: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.smooth_window != 0:
            if self.smooth_window < 3 or self.smooth_window % 2 == 0:
                raise ValueError("smooth_window must be 0 or an odd integer >= 3")


def mfm_options() -> DerivativeOptions:
    return DerivativeOptions(scheme="central", smooth_window=0)


def abm_options(n_points: int) -> DerivativeOptions:
    return DerivativeOptions(scheme="forward", smooth_window=default_smooth_window(n_points))


def moving_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving mean; the window truncates at the boundaries."""
    if window == 0:
        return x.copy()
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be 0 or an odd integer >= 3")
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(x)))
    n = x.size
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def differentiate(ts: TimeSeries, opts: DerivativeOptions) -> TimeSeries:
    """Estimate dC/dt at every sample point of a uniform-grid series.

    Central scheme: second-order interior stencil with first-order one-sided
    endpoints. Forward scheme: (c[i+1] - c[i]) / dt, with the final value
    duplicated so the output stays aligned with the input grid.
    """
    if ts.n < 3:
        raise ValueError("need at least 3 samples to differentiate")
    if not ts.is_uniform():
        raise ValueError("differentiate requires a uniform time grid")
    dt = ts.dt
    if opts.scheme == "central":
        d = np.gradient(ts.c, dt, edge_order=1)
    else:
        d = np.empty(ts.n)
        d[:-1] = np.diff(ts.c) / dt
        d[-1] = d[-2]
    if opts.smooth_window:
        d = moving_mean(d, opts.smooth_window)
    meta = dict(ts.meta)
    meta["derivative"] = {"scheme": opts.scheme, "smooth_window": opts.smooth_window}
    return TimeSeries(ts.t.copy(), d, meta)
