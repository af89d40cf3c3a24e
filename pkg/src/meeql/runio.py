"""Dataset and artifact persistence: trajectory CSVs, manifests, tables.

Directory layout under one run output directory:

    data/       per-rp trajectory CSVs + manifest.json   (generate)
    models/     serialized models + per-lambda AIC logs   (learn)
    eval/       MSE table + figures                       (evaluate)
    inference/  error sweep table + figure                (infer)

Every artifact directory gets a manifest recording the resolved config hash
and all seeds, which is sufficient to reproduce the directory exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from numpy.random import SeedSequence, default_rng

from . import __version__
from . import abm as abm_mod
from . import mfm as mfm_mod
from .config import RunConfig
from .me_eql import ExperimentSet
from .timeseries import TimeSeries, read_csv, write_csv

ENV_OUTPUT_ROOT = "MEEQL_OUTPUT_ROOT"
MANIFEST_NAME = "manifest.json"
# manifest keys that may differ between two runs of the same config
VOLATILE_MANIFEST_KEYS = ("created_at",)


def output_root() -> Path:
    return Path(os.environ.get(ENV_OUTPUT_ROOT, "."))


def resolve_output(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    return out if out.is_absolute() else output_root() / out


def rp_tag(rp: float) -> str:
    """Filename fragment for an rp value: 0.01 -> 'rp0.01'."""
    return f"rp{rp:g}"


def write_manifest(directory: Path, payload: dict) -> None:
    doc = {
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        **payload,
    }
    with open(directory / MANIFEST_NAME, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(directory) -> dict:
    with open(Path(directory) / MANIFEST_NAME) as fh:
        return json.load(fh)


def experiment_seed(base_seed: int, index: int) -> int:
    """Deterministic per-experiment seed derived from the run seed."""
    return int(SeedSequence(base_seed, spawn_key=(index,)).generate_state(1)[0])


def write_ensemble_csv(ts: TimeSeries, path) -> None:
    """ABM ensemble trajectory as ``t,C_mean,C_std,n_replicates`` rows."""
    std = np.asarray(ts.meta.get("c_std", np.zeros_like(ts.c)), dtype=float)
    n_rep = int(ts.meta.get("n_replicates", 1))
    with open(path, "w", newline="") as fh:
        fh.write("t,C_mean,C_std,n_replicates\n")
        for ti, ci, si in zip(ts.t.tolist(), ts.c.tolist(), std.tolist()):
            fh.write(f"{ti!r},{ci!r},{si!r},{n_rep}\n")


def read_ensemble_csv(path) -> TimeSeries:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,C_mean,C_std,n_replicates":
            raise ValueError(f"{path}: unexpected ensemble header {header!r}")
        t, c, s, n_rep = [], [], [], 1
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b, d, e = line.split(",")
            t.append(float(a))
            c.append(float(b))
            s.append(float(d))
            n_rep = int(e)
    ts = TimeSeries(np.array(t), np.array(c))
    ts.meta.update(c_std=np.array(s), n_replicates=n_rep, source="abm")
    return ts


def generate_mfm_set(cfg: RunConfig) -> ExperimentSet:
    """Closed-form logistic trajectories, with noise when sigma > 0."""
    experiments = []
    for j, rp in enumerate(cfg.experiment_rp_values()):
        params = mfm_mod.MfmParams(rp=rp, c0=cfg.ic, n_points=cfg.n_points)
        ts = mfm_mod.solve_mfm(params)
        if cfg.sigma > 0:
            rng = default_rng(SeedSequence(cfg.seed, spawn_key=(j,)))
            ts = mfm_mod.add_noise(ts, cfg.sigma, rng)
        ts.meta.update(rp=rp, source="mfm", sigma=cfg.sigma)
        experiments.append((rp, ts))
    return ExperimentSet(
        experiments,
        ic=cfg.ic,
        source="mfm",
        metadata={"sigma": cfg.sigma, "seed": cfg.seed},
    )


def generate_abm_set(cfg: RunConfig, jobs: int = 1) -> ExperimentSet:
    """Replicate-averaged lattice simulations, one ensemble per rp."""
    experiments = []
    seeds = []
    for j, rp in enumerate(cfg.experiment_rp_values()):
        seed = experiment_seed(cfg.seed, j)
        seeds.append(seed)
        params = abm_mod.AbmParams(
            rp=rp,
            rm=cfg.abm.rm,
            lattice_side=cfg.abm.side,
            ic_fraction=cfg.ic,
            n_points=cfg.n_points,
            n_replicates=cfg.abm.n_replicates,
            seed=seed,
        )
        ts = abm_mod.ensemble_mean(params, jobs=jobs)
        experiments.append((rp, ts))
    return ExperimentSet(
        experiments,
        ic=cfg.ic,
        source="abm",
        metadata={
            "seed": cfg.seed,
            "per_rp_seeds": seeds,
            "n_replicates": cfg.abm.n_replicates,
        },
    )


def write_dataset(exp_set: ExperimentSet, cfg: RunConfig, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for rp, ts in exp_set.experiments:
        name = f"{exp_set.source}_{rp_tag(rp)}.csv"
        path = directory / name
        if exp_set.source == "abm":
            write_ensemble_csv(ts, path)
        else:
            write_csv(ts, path)
        files.append(name)
    replicate_seeds = {}
    if exp_set.source == "abm":
        for (rp, ts), base in zip(
            exp_set.experiments, exp_set.metadata["per_rp_seeds"]
        ):
            replicate_seeds[rp_tag(rp)] = ts.meta.get(
                "replicate_seeds", [base]
            )
    write_manifest(
        directory,
        {
            "kind": "dataset",
            "config_hash": cfg.config_hash(),
            "config": cfg.canonical_dict(),
            "source": exp_set.source,
            "rp_values": [rp for rp, _ in exp_set.experiments],
            "seed": cfg.seed,
            "files": files,
            "replicate_seeds": replicate_seeds,
        },
    )
    return directory


def read_dataset(directory) -> ExperimentSet:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "dataset":
        raise ValueError(f"{directory}: manifest does not describe a dataset")
    source = manifest["source"]
    experiments = []
    for rp, name in zip(manifest["rp_values"], manifest["files"]):
        path = directory / name
        if source == "abm":
            ts = read_ensemble_csv(path)
        else:
            ts = read_csv(path)
        ts.meta.update(rp=rp, source=source)
        experiments.append((float(rp), ts))
    cfg_doc = manifest.get("config", {})
    return ExperimentSet(
        experiments,
        ic=float(cfg_doc.get("ic", experiments[0][1].c[0])),
        source=source,
        metadata={
            "seed": manifest.get("seed"),
            "sigma": cfg_doc.get("sigma"),
            "config_hash": manifest.get("config_hash"),
        },
    )


def write_aic_log(records, path) -> None:
    """Per-lambda mean AIC trace as ``lambda,mean_aic`` rows."""
    with open(path, "w", newline="") as fh:
        fh.write("lambda,mean_aic\n")
        for rec in records:
            fh.write(f"{rec.lam!r},{rec.mean_aic!r}\n")


def write_mse_table(rows, path) -> None:
    """Generalization MSE table.

    ``rows`` maps rp -> dict with keys oat, es, meanfield, oat_single
    (missing entries and +inf are written as empty cells).
    """

    def cell(value) -> str:
        if value is None or not math.isfinite(value):
            return ""
        return repr(float(value))

    with open(path, "w", newline="") as fh:
        fh.write("rp,mse_oat,mse_es,mse_meanfield,mse_oat_single\n")
        for rp in sorted(rows):
            r = rows[rp]
            fh.write(
                f"{rp!r},{cell(r.get('oat'))},{cell(r.get('es'))},"
                f"{cell(r.get('meanfield'))},{cell(r.get('oat_single'))}\n"
            )


def read_mse_table(path) -> dict:
    rows = {}
    with open(path) as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rp = float(row["rp"])
            rows[rp] = {
                key: (float(row[col]) if row[col] else math.inf)
                for key, col in (
                    ("oat", "mse_oat"),
                    ("es", "mse_es"),
                    ("meanfield", "mse_meanfield"),
                    ("oat_single", "mse_oat_single"),
                )
            }
    return rows


def write_sweep_table(cells, path) -> None:
    """Inference sweep as ``rp_true,model,mean_rel_err,std_rel_err,n`` rows."""
    with open(path, "w", newline="") as fh:
        fh.write("rp_true,model,mean_rel_err,std_rel_err,n\n")
        for cell in cells:
            fh.write(
                f"{cell.rp_true!r},{cell.model_kind},{cell.mean_rel_err!r},"
                f"{cell.std_rel_err!r},{cell.n}\n"
            )


def read_sweep_table(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            out.append(
                {
                    "rp_true": float(row["rp_true"]),
                    "model": row["model"],
                    "mean_rel_err": float(row["mean_rel_err"]),
                    "std_rel_err": float(row["std_rel_err"]),
                    "n": int(row["n"]),
                }
            )
    return out


def compare_directories(a, b, ignore_manifest_keys=VOLATILE_MANIFEST_KEYS):
    """Byte-compare two artifact trees; manifests are compared as documents
    with volatile keys dropped. Returns a list of human-readable differences.
    """
    a, b = Path(a), Path(b)
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    diffs = []
    for missing in sorted(set(files_a) ^ set(files_b)):
        diffs.append(f"only on one side: {missing}")
    for rel in sorted(set(files_a) & set(files_b)):
        pa, pb = a / rel, b / rel
        if rel.name == MANIFEST_NAME:
            da, db = json.loads(pa.read_text()), json.loads(pb.read_text())
            for key in ignore_manifest_keys:
                da.pop(key, None)
                db.pop(key, None)
            if da != db:
                diffs.append(f"manifest differs: {rel}")
        elif pa.read_bytes() != pb.read_bytes():
            diffs.append(f"content differs: {rel}")
    return diffs
