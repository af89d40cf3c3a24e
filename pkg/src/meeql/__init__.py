"""Equation learning for birth-death-migration population dynamics.

Generate density trajectories from a lattice agent-based simulation or its
mean-field logistic limit, learn sparse polynomial ODE surrogates across a
proliferation-rate sweep, and invert the learned models to recover the rate
from new stochastic data.
"""

from .abm import AbmParams, Lattice, ensemble_mean, init_lattice, run_replicates, simulate
from .inference import InferenceResult, SweepCell, error_sweep, infer_rp
from .library import DesignMatrix, LibrarySpec, build_theta
from .me_eql import (
    ExperimentSet,
    NoGeneralizableStructureError,
    OatResult,
    ParameterizedModel,
    es_learn,
    evaluate_generalization,
    meanfield_model,
    oat_interpolate,
    oat_learn,
    predict,
)
from .mfm import MfmParams, add_noise, logistic_solution, mfm_ode, mfm_rhs, solve_mfm
from .numderiv import DerivativeOptions, differentiate
from .ode import (
    OdeDivergenceError,
    OdeError,
    OdeStepError,
    PolynomialOde,
    integrate,
    try_predict,
)
from .sparse import (
    CvProtocol,
    SparseModel,
    ThresholdUnsatisfiableError,
    aic_score,
    cross_validate,
    lasso,
    learn_single,
    majority_refine,
    select_lambda,
    vote_structure,
)
from .timeseries import TimeSeries, read_csv, uniform_grid, write_csv

__version__ = "0.1.0"
