"""Static vector figures for evaluation and inference artifacts.

SVG output is kept byte-deterministic: fixed hash salt, no embedded
creation date, and data provenance recorded in the figure metadata.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

HASH_SALT = "meeql"

MODEL_LABELS = {
    "oat": "OAT",
    "es": "ES",
    "meanfield": "mean-field",
    "oat_single": "OAT single",
}
MODEL_COLORS = {
    "oat": "tab:blue",
    "es": "tab:orange",
    "meanfield": "tab:green",
    "oat_single": "tab:purple",
}


def save_svg(fig, path, provenance: str = "") -> None:
    """Write ``fig`` as deterministic SVG and close it."""
    with plt.rc_context({"svg.hashsalt": HASH_SALT}):
        fig.savefig(
            path,
            format="svg",
            metadata={"Date": None, "Description": provenance},
        )
    plt.close(fig)


def _finite_series(rp_values, series):
    """Split rp/value pairs so non-finite entries render as gaps."""
    xs, ys = [], []
    for rp, v in zip(rp_values, series):
        if v is not None and math.isfinite(v) and v > 0:
            xs.append(rp)
            ys.append(v)
    return np.array(xs), np.array(ys)


def mse_figure(rows: dict, training_rp, path, provenance: str = "") -> list[str]:
    """MSE vs rp on a log axis, one line per model, training points marked.

    ``rows`` maps rp -> {model key -> MSE}. Returns the model keys that had
    at least one non-finite (divergent or missing) cell, for sidecar
    reporting by the caller.
    """
    rp_values = sorted(rows)
    gapped = []
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key in ("oat", "es", "meanfield", "oat_single"):
        series = [rows[rp].get(key) for rp in rp_values]
        if all(v is None for v in series):
            continue
        xs, ys = _finite_series(rp_values, series)
        if xs.size < len(rp_values):
            gapped.append(key)
        ax.plot(xs, ys, marker="o", ms=3, lw=1.2,
                color=MODEL_COLORS[key], label=MODEL_LABELS[key])
    for rp in training_rp:
        ax.axvline(rp, color="0.85", lw=0.8, zorder=0)
    ax.set_yscale("log")
    ax.set_xlabel("proliferation rate rp")
    ax.set_ylabel("MSE vs data")
    ax.legend(frameon=False, fontsize=9)
    ax.set_title("generalization error (vertical lines: training rp)", fontsize=10)
    fig.tight_layout()
    save_svg(fig, path, provenance)
    return gapped


def inference_figure(cells, path, provenance: str = "") -> None:
    """Mean relative inference error vs true rp with one-std bands."""
    by_model = {}
    for cell in cells:
        by_model.setdefault(cell.model_kind, []).append(cell)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for kind in ("oat", "es", "meanfield"):
        if kind not in by_model:
            continue
        rows = sorted(by_model[kind], key=lambda c: c.rp_true)
        x = np.array([c.rp_true for c in rows])
        mean = np.array([c.mean_rel_err for c in rows])
        std = np.array([c.std_rel_err for c in rows])
        color = MODEL_COLORS[kind]
        ax.plot(x, mean, marker="o", ms=3, lw=1.2, color=color,
                label=MODEL_LABELS[kind])
        ax.fill_between(x, np.maximum(mean - std, 1e-12), mean + std,
                        color=color, alpha=0.2, lw=0)
    ax.set_yscale("log")
    ax.set_xlabel("true proliferation rate rp")
    ax.set_ylabel("relative error of recovered rp")
    ax.legend(frameon=False, fontsize=9)
    ax.set_title("inference error (band: one standard deviation)", fontsize=10)
    fig.tight_layout()
    save_svg(fig, path, provenance)
