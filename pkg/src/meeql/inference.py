"""Recovering the proliferation rate from a single stochastic trajectory.

Given any rp-parameterized model, the estimate is the rp minimizing the sum
of squared differences between the model's forward solve and the observed
data. A log-spaced scan brackets the optimum before local refinement, since
the objective can be infinite (divergent model) over part of the range.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import abm, ode
from .me_eql import ParameterizedModel
from .optimize import minimize_scalar_logscan
from .timeseries import TimeSeries

DEFAULT_BOUNDS = (0.005, 6.0)
SCAN_POINTS = 50


class InferenceError(RuntimeError):
    """The model's forward solve failed across the whole search range."""


@dataclass
class InferenceResult:
    rp_true: float
    rp_hat: float
    relative_error: float
    sse_at_optimum: float
    model_kind: str


def sse_objective(model: ParameterizedModel, data: TimeSeries):
    """SSE between the model solved at rp and the data; +inf on divergence.

    The forward solve starts from the data's first sample.
    """
    c0 = float(data.c[0])

    def objective(rp: float) -> float:
        coefs = {k: v for k, v in model.coefficients_at(rp).items() if v != 0.0}
        pred = ode.try_predict(coefs, c0, data.t)
        if pred is None:
            return math.inf
        resid = pred - data.c
        return float(resid @ resid)

    return objective


def infer_rp(
    model: ParameterizedModel,
    data: TimeSeries,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
    rp_true: float | None = None,
) -> InferenceResult:
    """Point estimate of rp by SSE minimization over the bounds.

    rp_true (default: the data's recorded rp) anchors the relative error
    |rp_hat - rp_true| / rp_true.
    """
    lo, hi = bounds
    if not (0 < lo < hi):
        raise ValueError("bounds must satisfy 0 < lo < hi")
    if data.n < 2:
        raise ValueError("data must contain at least 2 samples")
    if rp_true is None:
        rp_true = data.meta.get("rp")
    if rp_true is None or not (rp_true > 0):
        raise ValueError("rp_true unavailable; pass it or record it in data.meta['rp']")

    try:
        res = minimize_scalar_logscan(sse_objective(model, data), lo, hi, n_scan=SCAN_POINTS)
    except ValueError as exc:
        raise InferenceError(f"model invalid over bounds {bounds}: {exc}") from exc
    return InferenceResult(
        rp_true=float(rp_true),
        rp_hat=float(res.x),
        relative_error=abs(res.x - rp_true) / rp_true,
        sse_at_optimum=float(res.fun),
        model_kind=model.kind,
    )


@dataclass
class SweepCell:
    """Aggregated inference accuracy for one (model, rp_true) pair."""

    rp_true: float
    model_kind: str
    mean_rel_err: float
    std_rel_err: float
    n: int


def _dataset_seed(base_seed: int, rp_index: int, dataset_index: int) -> int:
    state = np.random.SeedSequence(base_seed, spawn_key=(rp_index, dataset_index))
    return int(state.generate_state(1)[0])


def error_sweep(
    models: dict[str, ParameterizedModel],
    rp_values: list[float],
    n_noisy: int,
    abm_params: abm.AbmParams,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
    jobs: int = 1,
) -> list[SweepCell]:
    """Mean/std relative error per (model, rp) over fresh single-replicate data.

    All models see the same n_noisy trajectories at each rp. A failed
    inference drops that trajectory from its model's cell; cells keep the
    count that succeeded. Dataset seeds derive from (abm_params.seed, rp
    index, dataset index), so parallel and serial sweeps agree.
    """
    if not rp_values:
        raise ValueError("rp_values is empty")
    if n_noisy < 1:
        raise ValueError("n_noisy must be positive")

    def run_cell(task: tuple[int, int]) -> dict[str, float]:
        ri, di = task
        rp = rp_values[ri]
        params = replace(
            abm_params,
            rp=rp,
            n_replicates=1,
            t_end=None if rp > 0 else abm_params.t_end,
            seed=_dataset_seed(abm_params.seed, ri, di),
        )
        data = abm.simulate(params)
        out = {}
        for name, model in models.items():
            try:
                out[name] = infer_rp(model, data, bounds=bounds, rp_true=rp).relative_error
            except (InferenceError, ValueError):
                out[name] = math.nan
        return out

    tasks = [(ri, di) for ri in range(len(rp_values)) for di in range(n_noisy)]
    if jobs <= 1:
        rows = [run_cell(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, tasks))

    cells = []
    for ri, rp in enumerate(rp_values):
        for name in models:
            errs = np.array([rows[ri * n_noisy + di][name] for di in range(n_noisy)])
            errs = errs[~np.isnan(errs)]
            if errs.size == 0:
                cells.append(SweepCell(float(rp), name, math.nan, math.nan, 0))
                continue
            std = float(errs.std(ddof=1)) if errs.size > 1 else 0.0
            cells.append(SweepCell(float(rp), name, float(errs.mean()), std, int(errs.size)))
    return cells
