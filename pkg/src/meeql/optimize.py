"""Derivative-free minimizers used for coefficient refinement and inference.

Both minimizers treat +inf objective values as ordinary "worse than anything
finite" outcomes, because the objectives here forward-solve learned ODEs and
report divergence or constraint violations as +inf rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NM_MAX_ITER = 10_000
NM_SPREAD_TOL = 1e-12
NM_SIZE_TOL = 1e-8
NM_REL_STEP = 0.05
NM_ABS_STEP = 1e-4

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class NmResult:
    x: np.ndarray
    fun: float
    n_iter: int
    converged: bool


def _clean(v: float) -> float:
    return math.inf if math.isnan(v) else float(v)


def nelder_mead(
    f,
    x0: np.ndarray,
    max_iter: int = NM_MAX_ITER,
    spread_tol: float = NM_SPREAD_TOL,
) -> NmResult:
    """Nelder-Mead simplex descent with coefficients (1, 2, 0.5, 0.5).

    The initial simplex perturbs each coordinate by 5% (absolute 1e-4 for
    zero coordinates). Converged when the simplex value spread drops below
    spread_tol * (1 + |best value|) and the simplex itself has collapsed;
    the size condition guards against value ties across a still-wide simplex
    (for instance vertices placed symmetrically about a minimum). Otherwise
    the best vertex found within max_iter iterations is returned with
    converged=False.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if n == 0:
        raise ValueError("empty initial point")

    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5

    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        if x0[i] != 0.0:
            simplex[i + 1, i] *= 1.0 + NM_REL_STEP
        else:
            simplex[i + 1, i] = NM_ABS_STEP
    fvals = np.array([_clean(f(v)) for v in simplex])

    n_iter = 0
    converged = False
    while n_iter < max_iter:
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        spread = fvals[-1] - fvals[0]
        size = np.max(np.abs(simplex[1:] - simplex[0]))
        if (spread < spread_tol * (1.0 + abs(fvals[0]))
                and size < NM_SIZE_TOL * (1.0 + np.max(np.abs(simplex[0])))):
            converged = True
            break

        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = _clean(f(xr))
        if fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = _clean(f(xe))
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + rho * (xr - centroid)
            else:
                xc = centroid + rho * (simplex[-1] - centroid)
            fc = _clean(f(xc))
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                best = simplex[0].copy()
                for i in range(1, n + 1):
                    simplex[i] = best + sigma * (simplex[i] - best)
                    fvals[i] = _clean(f(simplex[i]))
        n_iter += 1

    best = int(np.argmin(fvals))
    return NmResult(simplex[best].copy(), float(fvals[best]), n_iter, converged)


@dataclass
class ScalarResult:
    x: float
    fun: float
    n_eval: int


def minimize_scalar_logscan(
    f,
    lo: float,
    hi: float,
    n_scan: int = 50,
    rel_tol: float = 1e-10,
) -> ScalarResult:
    """Global scan + local refinement for a positive scalar argument.

    Evaluates f on n_scan log-spaced points over [lo, hi], brackets the best
    one, runs golden-section search on the bracket, then polishes with a few
    three-point parabolic steps. The best point ever evaluated is returned,
    so the result is never worse than any scan point.
    """
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    if n_scan < 3:
        raise ValueError("n_scan must be at least 3")

    xs = np.logspace(math.log10(lo), math.log10(hi), n_scan)
    n_eval = 0

    best_x = math.nan
    best_f = math.inf

    def eval_at(x: float) -> float:
        nonlocal n_eval, best_x, best_f
        n_eval += 1
        v = _clean(f(float(x)))
        if v < best_f:
            best_f, best_x = v, float(x)
        return v

    fs = np.array([eval_at(x) for x in xs])
    if not np.isfinite(fs).any():
        raise ValueError("objective is infinite over the entire scan range")

    i = int(np.argmin(fs))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n_scan - 1)]

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = eval_at(c)
    fd = eval_at(d)
    for _ in range(200):
        if b - a <= rel_tol * (abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = eval_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = eval_at(d)

    # Parabolic polish through the current best and its bracket edges.
    xm, fm = best_x, best_f
    xa, xb = a, b
    fa, fb = eval_at(xa), eval_at(xb)
    for _ in range(5):
        if not (np.isfinite(fa) and np.isfinite(fm) and np.isfinite(fb)):
            break
        num = (xm - xa) ** 2 * (fm - fb) - (xm - xb) ** 2 * (fm - fa)
        den = (xm - xa) * (fm - fb) - (xm - xb) * (fm - fa)
        if den == 0.0:
            break
        xv = xm - 0.5 * num / den
        if not (min(xa, xb) < xv < max(xa, xb)) or xv == xm:
            break
        fv = eval_at(xv)
        if fv >= fm:
            break
        if xv < xm:
            xb, fb = xm, fm
        else:
            xa, fa = xm, fm
        xm, fm = xv, fv

    return ScalarResult(best_x, best_f, n_eval)
