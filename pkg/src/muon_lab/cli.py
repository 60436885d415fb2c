"""Command-line entry point.

Subcommands: escape-sweep, matfac, probe, verify-poly, verify-rmt, plot.
Common flags: --config PATH, --seed N, --out DIR, --jobs N, plus
repeatable --set key=value overrides. Unrecognized `--key value` pairs
are also treated as config overrides (so `--lambda 1e-6` works). The
environment variable MUON_LAB_SEED is the lowest-precedence seed source.

Every experiment writes its result files plus a manifest.json into the
output directory; re-running with `--config manifest.json` reproduces
the result CSVs byte for byte.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    config_to_dict,
    parse_config,
)
from .errors import ConfigError, MuonLabError
from .escape import aggregate, run_sweep, write_reports_csv, write_trials_csv
from .matfac import run_factorization, write_trace_csv
from .plots import render_plots
from .poly import (
    PolyCoeffs,
    robustness_radius,
    verify_amplification,
    verify_floor,
    verify_invariance,
)
from .probe import probe_at_checkpoints, write_surface_csv, write_surface_sidecar
from .rmt import (
    concentration_experiment,
    energy_scaling_experiment,
    subspace_angle_experiment,
)


def _parse_override(text: str):
    from .config import _parse_value

    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, _, val = text.partition("=")
    return key.strip(), _parse_value(val.strip())


def _collect_overrides(set_args, extras):
    overrides = {}
    for item in set_args or []:
        key, val = _parse_override(item)
        overrides[key] = val
    i = 0
    while i < len(extras):
        token = extras[i]
        if not token.startswith("--") or i + 1 >= len(extras):
            raise ConfigError(f"unrecognized argument {token!r}")
        from .config import _parse_value

        key = token[2:].replace("-", "_")
        if key == "lambda":
            key = "lam_values"
        overrides[key] = _parse_value(extras[i + 1])
        i += 2
    # scalar convenience: grid fields accept single values
    for key in ("d_values", "lam_values", "kappa_values"):
        if key in overrides and not isinstance(overrides[key], (list, tuple)):
            overrides[key] = [overrides[key]]
    return overrides


def _env_seed() -> int:
    raw = os.environ.get("MUON_LAB_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"MUON_LAB_SEED must be an integer, got {raw!r}") from exc


def _write_manifest(cfg: ExperimentConfig, out_dir: Path, outputs, wall_s):
    manifest = {
        "kind": cfg.kind,
        "master_seed": cfg.master_seed,
        "config": config_to_dict(cfg),
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "kernel_backend": _kernels.BACKEND,
        },
        "wall_time_s": round(wall_s, 3),
        "outputs": [str(p.name) for p in outputs],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _cmd_escape_sweep(cfg: ExperimentConfig, out_dir: Path, jobs: int) -> int:
    records = run_sweep(cfg.payload, jobs=jobs)
    trials_path = out_dir / "trials.csv"
    reports_path = out_dir / "sweep_reports.csv"
    write_trials_csv(records, trials_path)
    write_reports_csv(aggregate(records), reports_path)
    return 0


def _cmd_matfac(cfg: ExperimentConfig, out_dir: Path, jobs: int) -> int:
    opts = cfg.payload
    task = opts.task
    if cfg.master_seed:
        from dataclasses import replace

        task = replace(task, seed=cfg.master_seed)
    for optimizer in opts.optimizers:
        trace = run_factorization(task, optimizer=optimizer, record_every=opts.record_every)
        write_trace_csv(trace, out_dir / f"matfac_{optimizer}.csv")
        if trace.diverged:
            print(f"warning: {optimizer} run diverged; partial trace written")
    return 0


def _cmd_probe(cfg: ExperimentConfig, out_dir: Path, jobs: int) -> int:
    opts = cfg.payload
    task = opts.task
    if cfg.master_seed:
        from dataclasses import replace

        task = replace(task, seed=cfg.master_seed)
    checkpoints = [min(c, task.steps) for c in opts.checkpoints]
    trace, probes = probe_at_checkpoints(
        task,
        checkpoints,
        probe_cfg=opts.probe,
        optimizer=opts.optimizer,
        record_every=opts.record_every,
    )
    write_trace_csv(trace, out_dir / f"matfac_{opts.optimizer}.csv")
    for p in probes:
        write_surface_csv(p.surface, out_dir / f"surface_step{p.step:06d}.csv")
        write_surface_sidecar(p, out_dir / f"surface_step{p.step:06d}.json")
    return 0


def _cmd_verify_poly(cfg: ExperimentConfig, out_dir: Path, jobs: int) -> int:
    opts = cfg.payload
    coeffs = PolyCoeffs(opts.a, opts.b, opts.c)
    lo, hi = opts.interval_lo, opts.interval_hi
    amp = verify_amplification(coeffs, opts.amplification_grid)
    floor = verify_floor(coeffs, opts.floor_grid)
    inv = verify_invariance(coeffs, lo, hi)
    rows = [
        (
            "amplification",
            amp.passed,
            f"min ratio {amp.min_ratio:.4f} on (0, {amp.threshold:.4e}] (need >= 483)",
        ),
        ("floor", floor.passed, f"min iterate {floor.min_value:.4f} (need > 0.03)"),
        (
            "invariance",
            inv.invariant,
            f"image [{inv.image_lo:.4f}, {inv.image_hi:.4f}] of [{lo}, {hi}]",
        ),
    ]
    robustness = None
    if inv.invariant:
        robustness = robustness_radius(coeffs, lo, hi, n_certify=opts.certify_samples)
        rows.append(
            (
                "robustness",
                robustness.certified,
                f"radius {robustness.radius:.4f} (margin {robustness.margin:.4f},"
                f" sup bound {robustness.sup_bound:.3f}), {opts.certify_samples}"
                " perturbations certified",
            )
        )
    all_pass = all(ok for _, ok, _ in rows)
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    report = {
        "coefficients": [coeffs.a, coeffs.b, coeffs.c],
        "cases": {name: {"passed": ok, "detail": detail} for name, ok, detail in rows},
        "all_passed": all_pass,
    }
    (out_dir / "verify_poly.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    return 0 if all_pass else 1


def _cmd_verify_rmt(cfg: ExperimentConfig, out_dir: Path, jobs: int) -> int:
    opts = cfg.payload
    seed = cfg.master_seed
    conc = concentration_experiment(
        opts.concentration_d, opts.concentration_samples, seed=seed
    )
    conc_ok = abs(conc.mean_ct - 1.0) <= 0.02
    angles = {}
    for d in opts.angle_d_values:
        angles[d] = [
            subspace_angle_experiment(lam, d, opts.angle_trials, seed=seed)
            for lam in opts.angle_lambdas
        ]
    mono_ok = all(
        all(a.mean_sin_angle > b.mean_sin_angle for a, b in zip(reps, reps[1:]))
        for reps in angles.values()
    )
    energy = energy_scaling_experiment(
        opts.energy_d_values, opts.energy_samples, seed=seed
    )
    slope_ok = 0.98 <= energy.loglog_slope <= 1.02
    checks = [
        ("concentration", conc_ok, f"mean C = {conc.mean_ct:.5f} (need 1 +/- 0.02)"),
        ("angle-monotone", mono_ok, "sin angle decreasing in spike strength"),
        ("energy-slope", slope_ok, f"log-log slope {energy.loglog_slope:.4f}"),
    ]
    for name, ok, detail in checks:
        print(f"{name:<15} {'PASS' if ok else 'FAIL'}  {detail}")
    report = {
        "concentration": conc.as_dict(),
        "angles": {
            str(d): [r.as_dict() for r in reps] for d, reps in angles.items()
        },
        "energy": energy.as_dict(),
        "all_passed": all(ok for _, ok, _ in checks),
    }
    (out_dir / "verify_rmt.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    return 0 if report["all_passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muon-lab",
        description="Optimization-dynamics laboratory: escape sweeps, matrix "
        "factorization, landscape probes, and numerical lemma checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", default=None, help="config file (key=value or JSON)")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None, help="parallel workers")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config value (repeatable)",
        )
    plot = sub.add_parser("plot")
    plot.add_argument("--out", default="results", help="results directory to render")
    return parser


_RUNNERS = {
    "escape-sweep": _cmd_escape_sweep,
    "matfac": _cmd_matfac,
    "probe": _cmd_probe,
    "verify-poly": _cmd_verify_poly,
    "verify-rmt": _cmd_verify_rmt,
}


def main(argv=None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    try:
        if args.command == "plot":
            if extras:
                raise ConfigError(f"unrecognized arguments: {extras}")
            produced = render_plots(args.out)
            for p in produced:
                print(p)
            return 0
        overrides = _collect_overrides(args.set, extras)
        cfg = parse_config(
            args.command,
            config_path=args.config,
            overrides=overrides,
            master_seed=args.seed,
            output_dir=args.out,
            default_seed=_env_seed(),
        )
        out_dir = Path(cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        status = _RUNNERS[args.command](cfg, out_dir, args.jobs or 1)
        outputs = sorted(p for p in out_dir.iterdir() if p.name != "manifest.json")
        _write_manifest(cfg, out_dir, outputs, time.perf_counter() - start)
        return status
    except (MuonLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
