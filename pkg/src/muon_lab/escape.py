"""Saddle-escape trials, parameter sweeps, and aggregation.

A trial starts exactly at the saddle (W = 0), streams stochastic
gradients from the landscape, applies one optimizer, and stops at the
first step where the escape distance reaches r0 (or at max_steps).
Long Frobenius-metric trials run through the JIT kernels with noise
pregenerated in fixed-size chunks; the chunking scheme guarantees the
draw sequence is independent of backend and chunk boundaries.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .landscape import SaddleConfig, noise_chunk
from .optim import AdamState, MuonState, adamw_step, muon_step
from .rng import make_stream

__all__ = [
    "TrialRecord",
    "SweepReport",
    "SweepConfig",
    "MUON_SADDLE_HYPER",
    "ADAMW_SADDLE_HYPER",
    "run_trial",
    "detect_lock",
    "run_sweep",
    "aggregate",
    "write_trials_csv",
    "write_reports_csv",
]

# Optimizer settings for the saddle experiments.
MUON_SADDLE_HYPER = {"eta": 0.02, "mu": 0.95, "weight_decay": 0.0}
ADAMW_SADDLE_HYPER = {
    "eta": 3e-4,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "weight_decay": 0.0,
}

NOISE_CHUNK = 512
LOCK_THRESHOLD = 0.5


@dataclass(frozen=True)
class TrialRecord:
    optimizer: str
    cfg: SaddleConfig
    seed: int
    escaped: bool
    steps: int
    final_distance: float
    lock_step: int | None = None
    wall_time_ms: float = 0.0


@dataclass(frozen=True)
class SweepReport:
    optimizer: str
    d: int
    lam: float
    kappa: float
    noise_mode: str
    n_trials: int
    mean_steps: float
    std_steps: float
    ci95_half_width: float
    escape_fraction: float


def _trial_stream(cfg: SaddleConfig, seed: int) -> np.random.Generator:
    # optimizer is deliberately not part of the key: matched cells see
    # identical noise sequences for controlled comparisons
    return make_stream(
        seed,
        "saddle-trial",
        f"d={cfg.d}",
        f"lam={cfg.lam!r}",
        f"kappa={cfg.kappa!r}",
        cfg.noise_mode,
    )


def _distance(w: np.ndarray, cfg: SaddleConfig) -> float:
    if cfg.escape_metric == "coordinate":
        return abs(float(w[0, 0]))
    return float(np.linalg.norm(w))


def detect_lock(sigma_ratios, threshold: float = LOCK_THRESHOLD) -> int | None:
    """First 1-based step where sigma1(B)/||B||_F reaches the threshold."""
    for i, ratio in enumerate(sigma_ratios):
        if ratio >= threshold:
            return i + 1
    return None


def _run_trial_kernel(cfg, optimizer, hyper, max_steps, rng):
    """Fast chunked path (Frobenius metric, no per-step diagnostics)."""
    d = cfg.d
    w = np.zeros((d, d))
    if optimizer == "muon":
        mom = np.zeros((d, d))
    else:
        m = np.zeros((d, d))
        v = np.zeros((d, d))
    done = 0
    while done < max_steps:
        n = min(NOISE_CHUNK, max_steps - done)
        chunk = noise_chunk(cfg, rng, n)
        if optimizer == "muon":
            co = hyper.get("coeffs")
            a, b, c = co.as_tuple() if co is not None else (3.4445, -4.7750, 2.0315)
            esc = _kernels.muon_escape_chunk(
                w, mom, chunk, cfg.lam, hyper["eta"], hyper["mu"],
                hyper.get("update_scale", 0.2) * math.sqrt(d), a, b, c,
                hyper.get("ns_steps", 5), hyper.get("norm_guard", 1e-12),
                done, cfg.r0,
            )
        else:
            esc = _kernels.adamw_escape_chunk(
                w, m, v, chunk, cfg.lam, hyper["eta"], hyper["weight_decay"],
                hyper["beta1"], hyper["beta2"], hyper["epsilon"], done, cfg.r0,
            )
        if esc > 0:
            return int(esc), True, _distance(w, cfg)
        done += n
    return max_steps, False, _distance(w, cfg)


def _run_trial_generic(cfg, optimizer, hyper, max_steps, rng, collect_lock):
    """Reference path via the step-rule API; supports any escape metric
    and optional lock diagnostics."""
    d = cfg.d
    w = np.zeros((d, d))
    if optimizer == "muon":
        state = MuonState.fresh((d, d), **hyper)
    else:
        state = AdamState.fresh((d, d), **hyper)
    sigmas = [] if collect_lock else None
    done = 0
    while done < max_steps:
        n = min(NOISE_CHUNK, max_steps - done)
        chunk = noise_chunk(cfg, rng, n)
        for k in range(n):
            g = chunk[k]
            g[0, 0] -= cfg.lam * w[0, 0]
            if optimizer == "muon":
                w, diag = muon_step(w, g, state, want_sigma1=collect_lock)
                if collect_lock:
                    sigmas.append(diag["sigma1_ratio"])
            else:
                w, _ = adamw_step(w, g, state)
            t = done + k + 1
            if _distance(w, cfg) >= cfg.r0:
                return t, True, _distance(w, cfg), sigmas
        done += n
    return max_steps, False, _distance(w, cfg), sigmas


def run_trial(
    cfg: SaddleConfig,
    optimizer: str = "muon",
    max_steps: int = 50_000,
    seed: int | None = None,
    hyper: dict | None = None,
    collect_lock: bool = False,
    lock_threshold: float = LOCK_THRESHOLD,
) -> TrialRecord:
    """Run one escape trial to tau_esc or the step budget."""
    if optimizer not in ("muon", "adamw"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    base = MUON_SADDLE_HYPER if optimizer == "muon" else ADAMW_SADDLE_HYPER
    merged = {**base, **(hyper or {})}
    seed = cfg.seed if seed is None else seed
    rng = _trial_stream(cfg, seed)
    t0 = time.perf_counter()
    lock_step = None
    if collect_lock and optimizer == "muon":
        steps, escaped, dist, sigmas = _run_trial_generic(
            cfg, optimizer, merged, max_steps, rng, True
        )
        lock_step = detect_lock(sigmas, lock_threshold)
    elif cfg.escape_metric == "frobenius":
        steps, escaped, dist = _run_trial_kernel(cfg, optimizer, merged, max_steps, rng)
    else:
        steps, escaped, dist, _ = _run_trial_generic(
            cfg, optimizer, merged, max_steps, rng, False
        )
    wall_ms = (time.perf_counter() - t0) * 1e3
    return TrialRecord(
        optimizer=optimizer,
        cfg=cfg,
        seed=seed,
        escaped=escaped,
        steps=steps,
        final_distance=dist,
        lock_step=lock_step,
        wall_time_ms=wall_ms,
    )


@dataclass(frozen=True)
class SweepConfig:
    """Grid specification for an escape sweep.

    Per-cell escape radius: r0 when r0_ref_dim == 0; otherwise
    r0 * (d / r0_ref_dim)**r0_dim_power, letting the radius track a fixed
    per-parameter displacement budget (power 1) or a mildly super-linear
    rule across dimensions.
    """

    d_values: tuple[int, ...] = (64, 128, 256, 512, 1024)
    lam_values: tuple[float, ...] = (1e-6,)
    kappa_values: tuple[float, ...] = (100.0,)
    optimizers: tuple[str, ...] = ("muon", "adamw")
    noise_modes: tuple[str, ...] = ("standard",)
    trials_per_cell: int = 30
    max_steps: int = 50_000
    sigma_ortho: float = 0.01
    r0: float = 1.0
    r0_ref_dim: int = 0
    r0_dim_power: float = 1.0
    escape_metric: str = "frobenius"
    master_seed: int = 0

    def cell_r0(self, d: int) -> float:
        if self.r0_ref_dim <= 0:
            return self.r0
        return self.r0 * (d / self.r0_ref_dim) ** self.r0_dim_power

    def cells(self):
        for optimizer in self.optimizers:
            for mode in self.noise_modes:
                for d in self.d_values:
                    for lam in self.lam_values:
                        for kappa in self.kappa_values:
                            yield optimizer, SaddleConfig(
                                d=d,
                                lam=lam,
                                kappa=kappa,
                                sigma_ortho=self.sigma_ortho,
                                r0=self.cell_r0(d),
                                noise_mode=mode,
                                seed=self.master_seed,
                                escape_metric=self.escape_metric,
                            )


def _trial_task(args):
    optimizer, cfg, max_steps, seed = args
    return run_trial(cfg, optimizer, max_steps, seed=seed)


def run_sweep(sweep: SweepConfig, jobs: int = 1) -> list[TrialRecord]:
    """Run every (cell, trial) pair; deterministic regardless of jobs."""
    tasks = []
    for optimizer, cfg in sweep.cells():
        for trial in range(sweep.trials_per_cell):
            # distinct per-trial seeds derived from the master seed
            tasks.append((optimizer, cfg, sweep.max_steps, sweep.master_seed + trial))
    if jobs <= 1:
        return [_trial_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_trial_task, tasks, chunksize=1))


def aggregate(records) -> list[SweepReport]:
    """Group trials by cell and compute summary statistics."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        key = (r.optimizer, r.cfg.d, r.cfg.lam, r.cfg.kappa, r.cfg.noise_mode)
        groups.setdefault(key, []).append(r)
    reports = []
    for key, rs in groups.items():
        steps = np.array([r.steps for r in rs], dtype=np.float64)
        n = len(rs)
        std = float(steps.std(ddof=1)) if n >= 2 else 0.0
        reports.append(
            SweepReport(
                optimizer=key[0],
                d=key[1],
                lam=key[2],
                kappa=key[3],
                noise_mode=key[4],
                n_trials=n,
                mean_steps=float(steps.mean()),
                std_steps=std,
                ci95_half_width=1.96 * std / math.sqrt(n) if n >= 2 else 0.0,
                escape_fraction=sum(r.escaped for r in rs) / n,
            )
        )
    return reports


def _fmt(x) -> str:
    return repr(float(x))


def write_trials_csv(records, path):
    """TrialRecord CSV; shortest round-trip float formatting, LF endings."""
    lines = [
        "optimizer,d,lambda,kappa,noise_mode,seed,escaped,steps,final_distance,lock_step"
    ]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.optimizer,
                    str(r.cfg.d),
                    _fmt(r.cfg.lam),
                    _fmt(r.cfg.kappa),
                    r.cfg.noise_mode,
                    str(r.seed),
                    "true" if r.escaped else "false",
                    str(r.steps),
                    _fmt(r.final_distance),
                    "" if r.lock_step is None else str(r.lock_step),
                ]
            )
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_reports_csv(reports, path):
    lines = [
        "optimizer,d,lambda,kappa,noise_mode,n_trials,mean_steps,std_steps,"
        "ci95_half_width,escape_fraction"
    ]
    for r in reports:
        lines.append(
            ",".join(
                [
                    r.optimizer,
                    str(r.d),
                    _fmt(r.lam),
                    _fmt(r.kappa),
                    r.noise_mode,
                    str(r.n_trials),
                    _fmt(r.mean_steps),
                    _fmt(r.std_steps),
                    _fmt(r.ci95_half_width),
                    _fmt(r.escape_fraction),
                ]
            )
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
