"""Multi-experiment equation learning across a proliferation-rate sweep.

Two strategies generalize a learned model over rp:

* one-at-a-time: learn one sparse model per experiment, keep the models that
  share the majority structure, and fit each active coefficient as a
  polynomial in rp (degree min(3, m-1) for m retained models; a natural
  cubic spline mode is available behind a flag);
* embedded: one joint sparse regression over all experiments with every
  library term multiplied by that experiment's rp, so each coefficient
  function is a line through the origin.

The fixed logistic model (0.5 rp, -rp) joins both as the reference the
learned models are compared against.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import ode
from .library import LibrarySpec
from .numderiv import DerivativeOptions, abm_options, mfm_options
from .sparse import CvProtocol, SparseModel, learn_single, vote_structure
from .timeseries import TimeSeries

SOURCES = ("mfm", "abm")
KINDS = ("oat", "es", "meanfield")
INTERPOLATIONS = ("poly", "spline")
MAX_POLY_DEGREE = 3


class NoGeneralizableStructureError(ValueError):
    """Fewer than two experiments share the majority structure."""


@dataclass
class ExperimentSet:
    """Trajectories at strictly increasing rp values from one data source."""

    experiments: list[tuple[float, TimeSeries]]
    ic: float
    source: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.experiments:
            raise ValueError("experiment set is empty")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        rps = [rp for rp, _ in self.experiments]
        if any(b <= a for a, b in zip(rps, rps[1:])):
            raise ValueError("rp values must be strictly increasing")
        counts = {ts.n for _, ts in self.experiments}
        if len(counts) != 1:
            raise ValueError("experiments must share the sampling convention")

    @property
    def rp_values(self) -> list[float]:
        return [rp for rp, _ in self.experiments]

    def subset(self, rp_values: list[float]) -> "ExperimentSet":
        """Experiments at the requested rp values (must all be present)."""
        chosen = []
        for rp in rp_values:
            matches = [e for e in self.experiments if math.isclose(e[0], rp)]
            if not matches:
                raise KeyError(f"no experiment at rp={rp}")
            chosen.append(matches[0])
        return ExperimentSet(chosen, self.ic, self.source, dict(self.metadata))

    def default_deriv_opts(self) -> DerivativeOptions:
        n = self.experiments[0][1].n
        return abm_options(n) if self.source == "abm" else mfm_options()


@dataclass
class ParameterizedModel:
    """dC/dt = sum_k xi_k(rp) C^k with per-degree coefficient functions.

    Coefficient functions are polynomials in rp (ascending coefficient
    arrays); spline-mode models carry knot/value tables instead and evaluate
    with natural cubic splines.
    """

    kind: str
    coef_polys: dict[int, np.ndarray]
    retained_rp: tuple[float, ...] = ()
    discarded_rp: tuple[float, ...] = ()
    interpolation: str = "poly"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        if not self.coef_polys:
            raise ValueError("model has no active degrees")
        self.coef_polys = {int(k): np.asarray(v, dtype=float) for k, v in self.coef_polys.items()}
        if self.interpolation == "spline":
            from scipy.interpolate import CubicSpline

            self._splines = {
                k: CubicSpline(np.asarray(self.retained_rp), v, bc_type="natural")
                for k, v in self.coef_polys.items()
            }

    def degrees(self) -> list[int]:
        return sorted(self.coef_polys)

    def coefficients_at(self, rp: float) -> dict[int, float]:
        if self.interpolation == "spline":
            return {k: float(self._splines[k](rp)) for k in self.degrees()}
        return {
            k: float(np.polynomial.polynomial.polyval(rp, self.coef_polys[k]))
            for k in self.degrees()
        }

    def predict(self, rp: float, c0: float, t_grid: np.ndarray) -> TimeSeries:
        """Forward solve at rp; divergence propagates to the caller."""
        if rp < 0:
            raise ValueError("rp must be nonnegative")
        coefs = {k: v for k, v in self.coefficients_at(rp).items() if v != 0.0}
        t_grid = np.asarray(t_grid, dtype=float)
        if not coefs:
            return TimeSeries(t_grid.copy(), np.full(t_grid.size, float(c0)))
        return ode.integrate(ode.PolynomialOde(coefs), float(c0), t_grid)

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "interpolation": self.interpolation,
            "retained_rp": list(self.retained_rp),
            "discarded_rp": list(self.discarded_rp),
        }
        if self.interpolation == "spline":
            doc["degrees"] = [
                {"degree": k, "knot_values": self.coef_polys[k].tolist()} for k in self.degrees()
            ]
        else:
            doc["degrees"] = [
                {"degree": k, "coeff_poly_in_rp": self.coef_polys[k].tolist()}
                for k in self.degrees()
            ]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ParameterizedModel":
        interp = doc.get("interpolation", "poly")
        key = "knot_values" if interp == "spline" else "coeff_poly_in_rp"
        polys = {int(d["degree"]): np.asarray(d[key], dtype=float) for d in doc["degrees"]}
        return cls(
            kind=doc["kind"],
            coef_polys=polys,
            retained_rp=tuple(doc.get("retained_rp", ())),
            discarded_rp=tuple(doc.get("discarded_rp", ())),
            interpolation=interp,
        )

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ParameterizedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def meanfield_model() -> ParameterizedModel:
    """The fixed logistic reference dC/dt = 0.5 rp C - rp C^2."""
    return ParameterizedModel(
        kind="meanfield",
        coef_polys={1: np.array([0.0, 0.5]), 2: np.array([0.0, -1.0])},
    )


def predict(model: ParameterizedModel, rp: float, c0: float, t_grid: np.ndarray) -> TimeSeries:
    return model.predict(rp, c0, t_grid)


def _experiment_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(base_seed, spawn_key=(index,)).generate_state(1)[0])


@dataclass
class OatResult:
    """Per-experiment learning outcome; error is set when learning failed."""

    rp: float
    model: SparseModel | None
    error: str | None = None


def oat_learn(
    exp_set: ExperimentSet,
    protocol: CvProtocol,
    deriv_opts: DerivativeOptions | None = None,
    jobs: int = 1,
    records_out: dict | None = None,
) -> list[OatResult]:
    """Learn one plain-library sparse model per experiment.

    Each experiment gets its own split seed derived from the protocol seed
    and its position, so results are independent of evaluation order. A
    per-experiment selection failure becomes an OatResult with the error
    message instead of aborting the sweep. When ``records_out`` is a dict,
    it receives rp -> per-lambda CV records for logging.
    """
    if len(exp_set.experiments) < 2:
        raise ValueError("one-at-a-time learning needs at least 2 experiments")
    opts = deriv_opts or exp_set.default_deriv_opts()
    libspec = LibrarySpec(embed_rp=False)

    def learn_one(j: int) -> OatResult:
        rp, ts = exp_set.experiments[j]
        proto = replace(protocol, seed=_experiment_seed(protocol.seed, j))
        recs: list | None = [] if records_out is not None else None
        try:
            model = learn_single([(rp, ts)], libspec, proto, opts, rp=rp,
                                 records_out=recs)
            return OatResult(rp, model)
        except (ValueError, ode.OdeError) as exc:
            return OatResult(rp, None, error=str(exc))
        finally:
            if records_out is not None:
                records_out[rp] = recs

    indices = range(len(exp_set.experiments))
    if jobs <= 1:
        return [learn_one(j) for j in indices]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(learn_one, indices))


def oat_interpolate(
    models: list[SparseModel],
    interpolation: str = "poly",
) -> ParameterizedModel:
    """Fit coefficient-vs-rp functions through the majority-structure models.

    Models not sharing the majority structure are discarded and their rp
    values recorded. Polynomial degree is min(3, m-1) so small retained sets
    degrade to interpolating fits.
    """
    if len(models) < 2:
        raise NoGeneralizableStructureError("need at least 2 learned models")
    if any(m.rp is None for m in models):
        raise ValueError("every model must carry its rp")
    winner = vote_structure([m.structure for m in models])
    retained = [m for m in models if m.structure == winner]
    if len(retained) < 2:
        raise NoGeneralizableStructureError(
            f"majority structure held by only {len(retained)} of {len(models)} models"
        )
    retained.sort(key=lambda m: m.rp)
    rps = np.array([m.rp for m in retained])
    discarded = tuple(sorted(m.rp for m in models if m.structure != winner))
    degrees = retained[0].degrees()
    coef_rows = np.vstack([m.coefficients for m in retained])  # (m, n_active)

    coef_polys: dict[int, np.ndarray] = {}
    if interpolation == "spline":
        for col, deg in enumerate(degrees):
            coef_polys[deg] = coef_rows[:, col].copy()
    else:
        fit_deg = min(MAX_POLY_DEGREE, len(retained) - 1)
        for col, deg in enumerate(degrees):
            coef_polys[deg] = np.polynomial.polynomial.polyfit(rps, coef_rows[:, col], fit_deg)
    return ParameterizedModel(
        kind="oat",
        coef_polys=coef_polys,
        retained_rp=tuple(float(r) for r in rps),
        discarded_rp=discarded,
        interpolation=interpolation,
    )


def es_learn(
    exp_set: ExperimentSet,
    protocol: CvProtocol,
    deriv_opts: DerivativeOptions | None = None,
    jobs: int = 1,
    records_out: list | None = None,
) -> tuple[ParameterizedModel, SparseModel]:
    """One joint embedded-library fit over the whole experiment set.

    Returns the rp-parameterized model (coefficient functions xi_k * rp)
    together with the underlying sparse fit.
    """
    if len(exp_set.experiments) < 2:
        raise ValueError("embedded learning needs at least 2 experiments")
    opts = deriv_opts or exp_set.default_deriv_opts()
    libspec = LibrarySpec(embed_rp=True)
    model = learn_single(exp_set.experiments, libspec, protocol, opts, jobs=jobs,
                         records_out=records_out)
    if not model.degrees():
        raise NoGeneralizableStructureError("embedded fit selected an empty structure")
    coef_polys = {deg: np.array([0.0, c]) for deg, c in model.coef_map().items()}
    parameterized = ParameterizedModel(
        kind="es",
        coef_polys=coef_polys,
        retained_rp=tuple(exp_set.rp_values),
    )
    return parameterized, model


def evaluate_generalization(
    model: ParameterizedModel,
    full_set: ExperimentSet,
) -> list[tuple[float, float]]:
    """Mean squared error of the model against every experiment in the set.

    Predictions start from each experiment's first sample; a divergent
    forward solve records +inf for that rp.
    """
    table = []
    for rp, ts in full_set.experiments:
        coefs = {k: v for k, v in model.coefficients_at(rp).items() if v != 0.0}
        pred = ode.try_predict(coefs, float(ts.c[0]), ts.t)
        if pred is None:
            mse = math.inf
        else:
            mse = float(np.mean((pred - ts.c) ** 2))
        table.append((float(rp), mse))
    return table
