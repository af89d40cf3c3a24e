"""Command-line front end: generate, learn, evaluate, infer, verify.

Flags select the subcommand, the config file, and the seed/jobs overrides;
everything else lives in the config document. Exit codes: 0 success,
1 usage or config error, 2 computation error.
"""

from __future__ import annotations

import argparse
import math
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import abm as abm_mod
from . import inference as inference_mod
from . import me_eql, mfm, numderiv, ode, plots, runio, sparse
from .config import ConfigError, RunConfig, load_config, parse_config
from .me_eql import NoGeneralizableStructureError, ParameterizedModel
from .sparse import SparseModel, ThresholdUnsatisfiableError
from .timeseries import TimeSeries

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTE = 2

# errors that mean "inputs were wrong", not "the computation failed"
_USAGE_ERRORS = (ConfigError, FileNotFoundError, NotADirectoryError, PermissionError)

# built-in verification pipeline: noise-free MFM, 5-experiment design
VERIFY_CONFIG = {
    "source": "mfm",
    "sigma": 0.0,
    "experiments": "paper-5",
    "output": "verify",
}


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _deriv_opts(cfg: RunConfig, exp_set: me_eql.ExperimentSet):
    opts = exp_set.default_deriv_opts()
    if cfg.smooth_window is not None:
        opts = replace(opts, smooth_window=cfg.smooth_window)
    return opts


def _data_dir(cfg: RunConfig) -> Path:
    return runio.resolve_output(cfg) / "data"


def _models_dir(cfg: RunConfig) -> Path:
    return runio.resolve_output(cfg) / "models"


def cmd_generate(cfg: RunConfig, jobs: int = 1) -> Path:
    """Write the configured dataset (one CSV per rp) plus its manifest."""
    if cfg.source == "abm":
        exp_set = runio.generate_abm_set(cfg, jobs=jobs)
    else:
        exp_set = runio.generate_mfm_set(cfg)
    out = runio.write_dataset(exp_set, cfg, _data_dir(cfg))
    print(f"wrote {len(exp_set.experiments)} experiments to {out}")
    return out


def cmd_learn(cfg: RunConfig, mode: str = "both", jobs: int = 1) -> Path:
    """Learn OAT and/or ES models from the run's dataset directory."""
    data_dir = _data_dir(cfg)
    if not data_dir.is_dir():
        raise FileNotFoundError(
            f"{data_dir}: dataset not found; run `meeql generate` first"
        )
    exp_set = runio.read_dataset(data_dir)
    opts = _deriv_opts(cfg, exp_set)
    out = _models_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)

    files: list[str] = []
    summary: dict = {}
    errors: list[str] = []

    if mode in ("oat", "both"):
        records: dict = {}
        results = me_eql.oat_learn(
            exp_set, cfg.protocol.cv_protocol("oat"), deriv_opts=opts,
            jobs=jobs, records_out=records,
        )
        per_rp = {}
        for res in results:
            tag = runio.rp_tag(res.rp)
            if records.get(res.rp):
                name = f"oat_{tag}_aic.csv"
                runio.write_aic_log(records[res.rp], out / name)
                files.append(name)
            if res.model is None:
                errors.append(f"oat {tag}: {res.error}")
                per_rp[tag] = {"error": res.error}
                continue
            name = f"oat_{tag}.json"
            res.model.save(out / name)
            files.append(name)
            per_rp[tag] = {
                "structure": res.model.degrees(),
                "lambda": res.model.lam,
            }
        summary["oat"] = per_rp
        models = [r.model for r in results if r.model is not None]
        try:
            oat_model = me_eql.oat_interpolate(models, interpolation=cfg.interpolation)
            oat_model.save(out / "oat.json")
            files.append("oat.json")
            summary["oat_generalized"] = {
                "degrees": sorted(oat_model.coef_polys),
                "retained_rp": list(oat_model.retained_rp),
                "discarded_rp": list(oat_model.discarded_rp),
            }
        except NoGeneralizableStructureError as exc:
            errors.append(f"oat interpolation: {exc}")

    if mode in ("es", "both"):
        recs: list = []
        try:
            es_model, es_sparse = me_eql.es_learn(
                exp_set, cfg.protocol.cv_protocol("es"), deriv_opts=opts,
                jobs=jobs, records_out=recs,
            )
            es_model.save(out / "es.json")
            es_sparse.save(out / "es_sparse.json")
            files.extend(["es.json", "es_sparse.json"])
            summary["es"] = {
                "structure": es_sparse.degrees(),
                "lambda": es_sparse.lam,
            }
        except (ThresholdUnsatisfiableError, NoGeneralizableStructureError) as exc:
            errors.append(f"es: {exc}")
        finally:
            if recs:
                runio.write_aic_log(recs, out / "es_aic.csv")
                files.append("es_aic.csv")

    runio.write_manifest(
        out,
        {
            "kind": "models",
            "config_hash": cfg.config_hash(),
            "mode": mode,
            "files": sorted(files),
            "summary": summary,
            "errors": errors,
        },
    )
    for line in errors:
        print(f"error: {line}", file=sys.stderr)
    if errors:
        raise ThresholdUnsatisfiableError("; ".join(errors))
    print(f"wrote models to {out}")
    return out


def _load_models(models_dir: Path) -> dict[str, ParameterizedModel]:
    """Load every generalized model present, plus the fixed mean-field one."""
    models: dict[str, ParameterizedModel] = {}
    for kind in ("oat", "es"):
        path = models_dir / f"{kind}.json"
        if path.exists():
            models[kind] = ParameterizedModel.load(path)
    models["meanfield"] = me_eql.meanfield_model()
    return models


def cmd_evaluate(cfg: RunConfig, jobs: int = 1) -> Path:
    """Evaluate learned models against a full-sweep dataset; write CSV + figure."""
    models_dir = _models_dir(cfg)
    if not models_dir.is_dir():
        raise FileNotFoundError(
            f"{models_dir}: models not found; run `meeql learn` first"
        )
    if cfg.eval_data is not None:
        eval_dir = Path(cfg.eval_data)
        if not eval_dir.is_absolute():
            eval_dir = runio.output_root() / eval_dir
    else:
        eval_dir = _data_dir(cfg)
    if not eval_dir.is_dir():
        raise FileNotFoundError(f"{eval_dir}: evaluation dataset not found")

    full_set = runio.read_dataset(eval_dir)
    models = _load_models(models_dir)

    rows: dict[float, dict] = {rp: {} for rp, _ in full_set.experiments}
    for kind, model in models.items():
        for rp, mse in me_eql.evaluate_generalization(model, full_set):
            rows[rp][kind] = mse

    # per-experiment OAT models evaluated at their own training rp
    for path in sorted(models_dir.glob("oat_rp*.json")):
        single = SparseModel.load(path)
        if single.rp is None:
            continue
        for rp, ts in full_set.experiments:
            if math.isclose(rp, single.rp, rel_tol=1e-9, abs_tol=1e-12):
                pred = ode.try_predict(single.coef_map(), float(ts.c[0]), ts.t)
                mse = math.inf if pred is None else float(np.mean((pred - ts.c) ** 2))
                rows[rp]["oat_single"] = mse

    out = runio.resolve_output(cfg) / "eval"
    out.mkdir(parents=True, exist_ok=True)
    runio.write_mse_table(rows, out / "mse.csv")
    provenance = f"config_hash={cfg.config_hash()}"
    training_rp = cfg.experiment_rp_values()
    gapped = plots.mse_figure(rows, training_rp, out / "mse.svg", provenance)
    gaps = [
        (rp, kind)
        for rp in sorted(rows)
        for kind in sorted(rows[rp])
        if not math.isfinite(rows[rp][kind])
    ]
    with open(out / "divergences.txt", "w") as fh:
        if gaps:
            for rp, kind in gaps:
                fh.write(f"{kind} diverged at rp={rp!r}\n")
        else:
            fh.write("no divergent cells\n")
    runio.write_manifest(
        out,
        {
            "kind": "evaluation",
            "config_hash": cfg.config_hash(),
            "eval_data": str(eval_dir),
            "files": ["mse.csv", "mse.svg", "divergences.txt"],
            "divergent_cells": [[rp, kind] for rp, kind in gaps],
            "models_with_gaps": gapped,
        },
    )
    print(f"wrote evaluation to {out}")
    return out


def cmd_infer(cfg: RunConfig, jobs: int = 1) -> Path:
    """Run the rp-recovery error sweep; write CSV + error-band figure."""
    models_dir = _models_dir(cfg)
    if not models_dir.is_dir():
        raise FileNotFoundError(
            f"{models_dir}: models not found; run `meeql learn` first"
        )
    models = _load_models(models_dir)
    params = abm_mod.AbmParams(
        rp=1.0,
        rm=cfg.abm.rm,
        lattice_side=cfg.abm.side,
        ic_fraction=cfg.ic,
        n_points=cfg.n_points,
        n_replicates=1,
        seed=cfg.seed,
    )
    cells = inference_mod.error_sweep(
        models,
        cfg.inference.rp_values,
        cfg.inference.n_noisy,
        params,
        bounds=cfg.inference.bounds,
        jobs=jobs,
    )
    out = runio.resolve_output(cfg) / "inference"
    out.mkdir(parents=True, exist_ok=True)
    runio.write_sweep_table(cells, out / "sweep.csv")
    provenance = f"config_hash={cfg.config_hash()}"
    plots.inference_figure(cells, out / "errors.svg", provenance)
    runio.write_manifest(
        out,
        {
            "kind": "inference",
            "config_hash": cfg.config_hash(),
            "rp_values": list(cfg.inference.rp_values),
            "n_noisy": cfg.inference.n_noisy,
            "files": ["sweep.csv", "errors.svg"],
        },
    )
    print(f"wrote inference sweep to {out}")
    return out


def _oracle_checks() -> list[tuple[str, bool, str]]:
    """Fast numeric ground-truth checks (integrator, lasso, differences)."""
    checks = []

    worst = 0.0
    for rp in (0.1, 1.0, 5.0):
        params = mfm.MfmParams(rp=rp)
        grid = params.grid()
        numeric = ode.integrate(mfm.mfm_ode(rp), params.c0, grid)
        exact = mfm.logistic_solution(grid, rp, params.c0)
        worst = max(worst, float(np.max(np.abs(numeric.c - exact))))
    checks.append(("integrator vs closed-form logistic", worst < 1e-6,
                   f"max abs err {worst:.3e} (tol 1e-6)"))

    theta = np.ones((4, 1))
    y = np.full(4, 2.0)
    ls = sparse.lasso(theta, y, 0.0)[0]
    soft = sparse.lasso(theta, y, 4.0)[0]
    ok = abs(ls - 2.0) < 1e-8 and abs(soft - 1.5) < 1e-8
    checks.append(("lasso analytic soft-threshold", ok,
                   f"lam=0 -> {float(ls):g}, lam=4 -> {float(soft):g}"))

    # empirical convergence order of central differences on sin(t)
    errs = []
    for n in (101, 201):
        t = np.linspace(0.0, 1.0, n)
        d = numderiv.differentiate(
            TimeSeries(t, np.sin(t)),
            numderiv.DerivativeOptions(scheme="central", smooth_window=0),
        )
        interior = slice(1, -1)
        errs.append(float(np.max(np.abs(d.c[interior] - np.cos(t)[interior]))))
    order = math.log(errs[0] / errs[1]) / math.log(2.0)
    checks.append(("central difference order", order >= 1.9,
                   f"empirical order {order:.2f} (need >= 1.9)"))
    return checks


def cmd_verify(cfg: RunConfig | None, jobs: int = 4) -> int:
    """Re-run the pipeline serially and in parallel; demand identical bytes.

    Also runs the numeric oracle battery. Returns the number of failures.
    """
    failures = 0
    for name, ok, detail in _oracle_checks():
        print(f"{'PASS' if ok else 'FAIL'}: {name} ({detail})")
        failures += 0 if ok else 1

    if cfg is None:
        cfg = parse_config(dict(VERIFY_CONFIG))
    base = runio.resolve_output(cfg)
    trees = {}
    for label, n_jobs in (("serial", 1), ("parallel", max(2, jobs))):
        run_cfg = replace(cfg, output=str(base / f"verify_{label}"))
        cmd_generate(run_cfg, jobs=n_jobs)
        cmd_learn(run_cfg, mode="both", jobs=n_jobs)
        trees[label] = runio.resolve_output(run_cfg)
    diffs = runio.compare_directories(trees["serial"], trees["parallel"])
    if diffs:
        print(f"FAIL: serial vs parallel artifacts differ ({len(diffs)} files)")
        for line in diffs:
            print(f"  {line}")
        failures += 1
    else:
        print("PASS: serial and parallel runs are byte-identical")
        for tree in trees.values():
            shutil.rmtree(tree)
    return failures


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meeql", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_config=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", required=needs_config,
                       help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's data seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker pool size (default 1)")
        return p

    add("generate", "write the configured dataset")
    learn = add("learn", "learn models from the dataset")
    learn.add_argument("--mode", choices=("oat", "es", "both"), default="both")
    add("evaluate", "evaluate models against a full-sweep dataset")
    add("infer", "run the rp-recovery error sweep")
    add("verify", "oracle battery + serial/parallel determinism check",
        needs_config=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is not None and args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.command != "verify" and cfg is None:
            raise ConfigError("a config file is required")

        if args.command == "generate":
            cmd_generate(cfg, jobs=args.jobs)
        elif args.command == "learn":
            cmd_learn(cfg, mode=args.mode, jobs=args.jobs)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, jobs=args.jobs)
        elif args.command == "infer":
            cmd_infer(cfg, jobs=args.jobs)
        elif args.command == "verify":
            n_jobs = args.jobs if args.jobs > 1 else 4
            if cmd_verify(cfg, jobs=n_jobs):
                return EXIT_COMPUTE
        return EXIT_OK
    except _USAGE_ERRORS as exc:
        print(f"meeql: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"meeql: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    raise SystemExit(main())
