"""Static vector-graphic rendering of experiment results.

Reads the CSV artifacts written by the experiment runners and emits SVG
figures: escape-step scaling curves with confidence bands, loss and
effective-rank trajectories, probe-surface heatmaps, and spike-range
progressions.
"""

import csv
import json
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_plots"]


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _require(rows, columns, path):
    missing = [c for c in columns if rows and c not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")


def _plot_escape_vs(rows, x_col, out_path, x_label):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    series = {}
    for row in rows:
        key = (row["optimizer"], row["noise_mode"])
        series.setdefault(key, []).append(row)
    for (optimizer, mode), pts in sorted(series.items()):
        pts = sorted(pts, key=lambda r: float(r[x_col]))
        xs = np.array([float(r[x_col]) for r in pts])
        ys = np.array([float(r["mean_steps"]) for r in pts])
        ci = np.array([float(r["ci95_half_width"]) for r in pts])
        label = optimizer if mode == "standard" else f"{optimizer} ({mode})"
        ax.plot(xs, ys, marker="o", label=label)
        ax.fill_between(xs, ys - ci, ys + ci, alpha=0.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel("mean escape steps")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def _plot_matfac(rows, out_dir, stem):
    steps = np.array([int(r["step"]) for r in rows])
    produced = []
    for col, ylabel, suffix in (
        ("loss", "loss", "loss"),
        ("effective_rank", "effective rank of the factor product", "rank"),
    ):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(steps, [float(r[col]) for r in rows])
        if col == "loss":
            ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        path = out_dir / f"{stem}_{suffix}.svg"
        fig.savefig(path)
        plt.close(fig)
        produced.append(path)
    return produced


def _plot_surface(rows, out_path):
    alphas = sorted({float(r["alpha"]) for r in rows})
    betas = sorted({float(r["beta"]) for r in rows})
    grid = np.full((len(alphas), len(betas)), np.nan)
    a_idx = {a: i for i, a in enumerate(alphas)}
    b_idx = {b: j for j, b in enumerate(betas)}
    for r in rows:
        if r["loss"]:
            grid[a_idx[float(r["alpha"])], b_idx[float(r["beta"])]] = float(r["loss"])
    fig, ax = plt.subplots(figsize=(4.5, 4))
    finite = grid[np.isfinite(grid)]
    im = ax.imshow(
        grid.T,
        origin="lower",
        extent=[alphas[0], alphas[-1], betas[0], betas[-1]],
        vmin=finite.min() if finite.size else None,
        vmax=finite.max() if finite.size else None,
        aspect="auto",
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, label="loss")
    ax.set_xlabel("alpha (structural)")
    ax.set_ylabel("beta (bulk)")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def _plot_spike_ranges(sidecars, out_path):
    sidecars = sorted(sidecars, key=lambda p: p["step"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(
        [p["step"] for p in sidecars],
        [p["spike_range"] for p in sidecars],
        marker="o",
    )
    ax.set_yscale("log")
    ax.set_xlabel("checkpoint step")
    ax.set_ylabel("spike range")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def render_plots(results_dir) -> list[Path]:
    """Render every plottable artifact found under results_dir."""
    results_dir = Path(results_dir)
    produced: list[Path] = []
    reports = results_dir / "sweep_reports.csv"
    if reports.exists():
        rows = _read_csv(reports)
        _require(rows, ["optimizer", "d", "lambda", "mean_steps", "ci95_half_width"], reports)
        if rows:
            if len({r["d"] for r in rows}) > 1:
                produced.append(
                    _plot_escape_vs(rows, "d", results_dir / "escape_vs_d.svg", "dimension d")
                )
            if len({r["lambda"] for r in rows}) > 1:
                produced.append(
                    _plot_escape_vs(
                        rows, "lambda", results_dir / "escape_vs_lambda.svg", "curvature lambda"
                    )
                )
    for trace_path in sorted(results_dir.glob("matfac_*.csv")):
        rows = _read_csv(trace_path)
        _require(rows, ["step", "loss", "effective_rank"], trace_path)
        if rows:
            produced.extend(_plot_matfac(rows, results_dir, trace_path.stem))
    for surf_path in sorted(results_dir.glob("surface_step*.csv")):
        rows = _read_csv(surf_path)
        _require(rows, ["alpha", "beta", "loss"], surf_path)
        if rows:
            produced.append(_plot_surface(rows, surf_path.with_suffix(".svg")))
    sidecars = []
    for sc_path in sorted(results_dir.glob("surface_step*.json")):
        sidecars.append(json.loads(sc_path.read_text()))
    if len(sidecars) > 1:
        produced.append(_plot_spike_ranges(sidecars, results_dir / "spike_range.svg"))
    if not produced:
        warnings.warn(f"no plottable results found in {results_dir}")
    return produced
