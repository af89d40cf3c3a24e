"""Declarative run configuration: schema, validation, canonical hashing.

A run is described by a single YAML document. Every key has a default, so
``{}`` is a valid config; unknown keys are rejected at any nesting level so
typos fail before any computation starts.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from . import abm as abm_mod
from . import mfm as mfm_mod
from . import sparse

PAPER_10 = tuple(round(0.01 + 0.5 * k, 2) for k in range(10))
PAPER_5 = tuple(round(0.01 + 1.0 * k, 2) for k in range(5))

_SUBSET_NAMES = ("all", "paper-10", "paper-5")


class ConfigError(ValueError):
    """Invalid configuration document; message names the offending key."""


@dataclass(frozen=True)
class SweepSpec:
    """Equi-spaced rp grid used when ``experiments: all``."""

    start: float = 0.01
    stop: float = 5.0
    count: int = 50

    def values(self) -> list[float]:
        if self.count == 1:
            return [self.start]
        step = (self.stop - self.start) / (self.count - 1)
        return [self.start + step * i for i in range(self.count)]


@dataclass(frozen=True)
class AbmConfig:
    side: int = abm_mod.DEFAULT_SIDE
    rm: float = abm_mod.DEFAULT_RM
    n_replicates: int = abm_mod.DEFAULT_REPLICATES


@dataclass(frozen=True)
class InferenceConfig:
    rp_values: tuple = (0.01, 2.51, 4.91)
    n_noisy: int = 10
    bounds: tuple = (0.005, 6.0)


@dataclass(frozen=True)
class ProtocolConfig:
    seed: int = 0
    n_splits: int = 10
    train_fraction: float = 0.8
    lambda_min: float = sparse.LAMBDA_MIN
    lambda_max: float = sparse.LAMBDA_MAX
    lambda_count: int = sparse.LAMBDA_GRID_SIZE
    oat_threshold: float = sparse.OAT_COEFF_THRESHOLD
    es_threshold: float = sparse.ES_COEFF_THRESHOLD
    score_rtol: float = sparse.SCORE_RTOL
    score_atol: float = sparse.SCORE_ATOL

    def cv_protocol(self, mode: str) -> sparse.CvProtocol:
        """Build the CvProtocol for ``mode`` ("oat" or "es")."""
        threshold = self.oat_threshold if mode == "oat" else self.es_threshold
        grid = sparse.default_lambda_grid(
            self.lambda_min, self.lambda_max, self.lambda_count
        )
        return sparse.CvProtocol(
            n_splits=self.n_splits,
            train_fraction=self.train_fraction,
            lambda_grid=grid,
            coeff_threshold=threshold,
            seed=self.seed,
            score_rtol=self.score_rtol,
            score_atol=self.score_atol,
        )


@dataclass(frozen=True)
class RunConfig:
    output: str = "run"
    seed: int = 0
    source: str = "mfm"
    ic: float = mfm_mod.DEFAULT_C0
    sigma: float = mfm_mod.DEFAULT_SIGMA
    n_points: int = 100
    experiments: object = "paper-10"
    rp_sweep: SweepSpec = field(default_factory=SweepSpec)
    abm: AbmConfig = field(default_factory=AbmConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    smooth_window: object = None
    interpolation: str = "poly"
    eval_data: object = None
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    def experiment_rp_values(self) -> list[float]:
        if self.experiments == "paper-10":
            return list(PAPER_10)
        if self.experiments == "paper-5":
            return list(PAPER_5)
        if self.experiments == "all":
            return self.rp_sweep.values()
        return list(self.experiments)

    def canonical_dict(self) -> dict:
        """Config as a plain dict, minus the storage location.

        Two runs of the same computation into different directories share
        a canonical dict (and hence a config hash).
        """
        doc = asdict(self)
        doc.pop("output")
        return doc

    def config_hash(self) -> str:
        return hash_config(self.canonical_dict())


def hash_config(doc: dict) -> str:
    """Stable short hash of a config document (order-independent)."""
    blob = json.dumps(doc, sort_keys=True, default=_json_fallback)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _json_fallback(value):
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot hash config value {value!r}")


def _require_keys(doc: dict, allowed: set, context: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {context}{unknown[0]!r}")


def _as_number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise ConfigError(f"{key} must be finite, got {value!r}")
    return out


def _as_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def _parse_sweep(doc: dict) -> SweepSpec:
    _require_keys(doc, {"start", "stop", "count"}, "rp_sweep.")
    spec = SweepSpec(
        start=_as_number(doc.get("start", 0.01), "rp_sweep.start"),
        stop=_as_number(doc.get("stop", 5.0), "rp_sweep.stop"),
        count=_as_int(doc.get("count", 50), "rp_sweep.count"),
    )
    if spec.count < 1 or spec.start <= 0 or spec.stop < spec.start:
        raise ConfigError("rp_sweep must satisfy 0 < start <= stop, count >= 1")
    return spec


def _parse_abm(doc: dict) -> AbmConfig:
    _require_keys(doc, {"side", "rm", "n_replicates"}, "abm.")
    cfg = AbmConfig(
        side=_as_int(doc.get("side", abm_mod.DEFAULT_SIDE), "abm.side"),
        rm=_as_number(doc.get("rm", abm_mod.DEFAULT_RM), "abm.rm"),
        n_replicates=_as_int(
            doc.get("n_replicates", abm_mod.DEFAULT_REPLICATES), "abm.n_replicates"
        ),
    )
    if cfg.side < 2 or cfg.rm < 0 or cfg.n_replicates < 1:
        raise ConfigError("abm requires side >= 2, rm >= 0, n_replicates >= 1")
    return cfg


def _parse_inference(doc: dict) -> InferenceConfig:
    _require_keys(doc, {"rp_values", "n_noisy", "bounds"}, "inference.")
    raw = doc.get("rp_values", [0.01, 2.51, 4.91])
    if isinstance(raw, dict):
        sweep = _parse_sweep(raw)
        values = tuple(sweep.values())
    elif isinstance(raw, list) and raw:
        values = tuple(_as_number(v, "inference.rp_values[]") for v in raw)
    else:
        raise ConfigError("inference.rp_values must be a list or a sweep mapping")
    bounds = doc.get("bounds", [0.005, 6.0])
    if not (isinstance(bounds, list) and len(bounds) == 2):
        raise ConfigError("inference.bounds must be [lo, hi]")
    lo = _as_number(bounds[0], "inference.bounds[0]")
    hi = _as_number(bounds[1], "inference.bounds[1]")
    if not 0 < lo < hi:
        raise ConfigError("inference.bounds must satisfy 0 < lo < hi")
    n_noisy = _as_int(doc.get("n_noisy", 10), "inference.n_noisy")
    if n_noisy < 1:
        raise ConfigError("inference.n_noisy must be >= 1")
    if any(v <= 0 for v in values):
        raise ConfigError("inference.rp_values must be positive")
    return InferenceConfig(rp_values=values, n_noisy=n_noisy, bounds=(lo, hi))


def _parse_protocol(doc: dict) -> ProtocolConfig:
    allowed = {
        "seed", "n_splits", "train_fraction", "lambda_min", "lambda_max",
        "lambda_count", "oat_threshold", "es_threshold", "score_rtol",
        "score_atol",
    }
    _require_keys(doc, allowed, "protocol.")
    base = ProtocolConfig()
    cfg = ProtocolConfig(
        seed=_as_int(doc.get("seed", base.seed), "protocol.seed"),
        n_splits=_as_int(doc.get("n_splits", base.n_splits), "protocol.n_splits"),
        train_fraction=_as_number(
            doc.get("train_fraction", base.train_fraction), "protocol.train_fraction"
        ),
        lambda_min=_as_number(
            doc.get("lambda_min", base.lambda_min), "protocol.lambda_min"
        ),
        lambda_max=_as_number(
            doc.get("lambda_max", base.lambda_max), "protocol.lambda_max"
        ),
        lambda_count=_as_int(
            doc.get("lambda_count", base.lambda_count), "protocol.lambda_count"
        ),
        oat_threshold=_as_number(
            doc.get("oat_threshold", base.oat_threshold), "protocol.oat_threshold"
        ),
        es_threshold=_as_number(
            doc.get("es_threshold", base.es_threshold), "protocol.es_threshold"
        ),
        score_rtol=_as_number(
            doc.get("score_rtol", base.score_rtol), "protocol.score_rtol"
        ),
        score_atol=_as_number(
            doc.get("score_atol", base.score_atol), "protocol.score_atol"
        ),
    )
    # delegate range checks to CvProtocol's own validation
    try:
        cfg.cv_protocol("oat")
        cfg.cv_protocol("es")
    except ValueError as exc:
        raise ConfigError(f"protocol: {exc}") from None
    return cfg


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed YAML mapping and return the resolved RunConfig."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    allowed = {
        "output", "seed", "source", "ic", "sigma", "n_points", "experiments",
        "rp_sweep", "abm", "protocol", "smooth_window", "interpolation",
        "eval_data", "inference",
    }
    _require_keys(doc, allowed, "")

    source = doc.get("source", "mfm")
    if source not in ("mfm", "abm"):
        raise ConfigError(f"source must be mfm or abm, got {source!r}")

    ic = _as_number(doc.get("ic", mfm_mod.DEFAULT_C0), "ic")
    if not 0 < ic < 1:
        raise ConfigError("ic must lie in (0, 1)")

    sigma = _as_number(doc.get("sigma", mfm_mod.DEFAULT_SIGMA), "sigma")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")

    n_points = _as_int(doc.get("n_points", 100), "n_points")
    if n_points < 2:
        raise ConfigError("n_points must be >= 2")

    experiments = doc.get("experiments", "paper-10")
    if isinstance(experiments, str):
        if experiments not in _SUBSET_NAMES:
            raise ConfigError(
                f"experiments must be one of {_SUBSET_NAMES} or a list of rp values"
            )
    elif isinstance(experiments, list) and experiments:
        values = [_as_number(v, "experiments[]") for v in experiments]
        if any(v <= 0 for v in values):
            raise ConfigError("experiments rp values must be positive")
        if sorted(set(values)) != values:
            raise ConfigError("experiments rp values must be strictly increasing")
        experiments = tuple(values)
    else:
        raise ConfigError("experiments must be a subset name or a non-empty list")

    smooth_window = doc.get("smooth_window")
    if smooth_window is not None:
        smooth_window = _as_int(smooth_window, "smooth_window")
        if smooth_window != 0 and (smooth_window < 3 or smooth_window % 2 == 0):
            raise ConfigError("smooth_window must be 0 or odd and >= 3")

    interpolation = doc.get("interpolation", "poly")
    if interpolation not in ("poly", "spline"):
        raise ConfigError("interpolation must be poly or spline")

    eval_data = doc.get("eval_data")
    if eval_data is not None and not isinstance(eval_data, str):
        raise ConfigError("eval_data must be a path string")

    output = doc.get("output", "run")
    if not isinstance(output, str) or not output:
        raise ConfigError("output must be a non-empty path string")

    return RunConfig(
        output=output,
        seed=_as_int(doc.get("seed", 0), "seed"),
        source=source,
        ic=ic,
        sigma=sigma,
        n_points=n_points,
        experiments=experiments,
        rp_sweep=_parse_sweep(doc.get("rp_sweep", {}) or {}),
        abm=_parse_abm(doc.get("abm", {}) or {}),
        protocol=_parse_protocol(doc.get("protocol", {}) or {}),
        smooth_window=smooth_window,
        interpolation=interpolation,
        eval_data=eval_data,
        inference=_parse_inference(doc.get("inference", {}) or {}),
    )


def load_config(path) -> RunConfig:
    """Load and validate a YAML config file."""
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else "?"
        raise ConfigError(f"{path}: YAML syntax error at line {line}: {exc.problem}")
    try:
        return parse_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
