"""Stochastic online matrix factorization with a rank-trapped start.

The target W* has a full exponentially-decaying spectrum; the model is a
rank-R product A B^T whose trailing columns start at microscopic scale.
Inputs are Gaussian rows with exponentially decaying per-feature survival
probabilities. The quantity of interest is how fast an optimizer ignites
the dormant columns, read off the effective rank of A B^T.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .optim import AdamState, LrSchedule, MuonState, adamw_step, lr_at, muon_step
from .rng import make_stream
from .spectral import entropy_rank

__all__ = [
    "FactorizationConfig",
    "RunTrace",
    "MUON_MATFAC_HYPER",
    "ADAMW_MATFAC_HYPER",
    "build_target",
    "init_factors",
    "sample_batch",
    "loss_and_grads",
    "product_singular_values",
    "run_factorization",
    "write_trace_csv",
]

# Optimizer settings for the factorization task.
MUON_MATFAC_HYPER = {"eta": 0.01, "mu": 0.95, "weight_decay": 0.0}
ADAMW_MATFAC_HYPER = {
    "eta": 5e-4,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "weight_decay": 0.01,
}

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class FactorizationConfig:
    d: int = 512
    rank_capacity: int = 64
    kappa: float = 1e5
    sigma_max: float = 10.0
    active_rank: int = 2
    active_var: float = 1e-4
    dormant_var: float = 1e-12
    batch: int = 64
    mask_decay: float = 0.05
    steps: int = 5000
    schedule: LrSchedule | None = None  # None -> full cosine over `steps`
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if not 1 <= self.active_rank <= self.rank_capacity <= self.d:
            raise ValueError("need active_rank <= rank_capacity <= d")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.batch < 1 or self.steps < 0:
            raise ValueError("batch must be >= 1 and steps >= 0")

    def resolved_schedule(self) -> LrSchedule:
        if self.schedule is not None:
            return self.schedule
        # cosine annealing across the whole run, no hold, decay to zero
        return LrSchedule(
            kind="cosine-tail",
            total_steps=max(self.steps, 1),
            hold_fraction=0.0,
            floor_fraction=0.0,
        )


def build_target(
    d: int, kappa: float, sigma_max: float, rng: np.random.Generator
) -> np.ndarray:
    """U* diag(sigma) V*^T with orthogonal factors from the SVD of one
    Gaussian draw and sigma_i = sigma_max * kappa^(-i/(d-1))."""
    g = rng.standard_normal((d, d))
    u, _, vt = np.linalg.svd(g)
    i = np.arange(d, dtype=np.float64)
    sigma = sigma_max * kappa ** (-i / (d - 1))
    return (u * sigma) @ vt


def init_factors(
    cfg: FactorizationConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """d x R factors with active columns at active_var and the rest at
    dormant_var (the rank trap)."""
    scales = np.full(cfg.rank_capacity, math.sqrt(cfg.dormant_var))
    scales[: cfg.active_rank] = math.sqrt(cfg.active_var)
    a = rng.standard_normal((cfg.d, cfg.rank_capacity)) * scales
    b = rng.standard_normal((cfg.d, cfg.rank_capacity)) * scales
    return a, b


def survival_probs(cfg: FactorizationConfig) -> np.ndarray:
    return np.exp(-cfg.mask_decay * np.arange(cfg.d))


def sample_batch(
    cfg: FactorizationConfig, w_star: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Masked Gaussian inputs and their targets y = x W*^T.

    The Bernoulli feature mask is applied to x before forming y, so zero
    loss stays attainable.
    """
    x = rng.standard_normal((cfg.batch, cfg.d))
    mask = rng.random((cfg.batch, cfg.d)) < survival_probs(cfg)
    x = x * mask
    return x, x @ w_star.T


def loss_and_grads(a, b, x, y):
    """Half mean-squared residual of x B A^T against y, with exact grads."""
    batch = x.shape[0]
    xb = x @ b
    r = xb @ a.T - y
    loss = float(np.sum(r * r)) / (2.0 * batch)
    ga = (r.T @ xb) / batch
    gb = (x.T @ (r @ a)) / batch
    return loss, ga, gb


def product_singular_values(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Singular values of A B^T without forming the d x d product."""
    qa, ra = np.linalg.qr(a)
    qb, rb = np.linalg.qr(b)
    return np.linalg.svd(ra @ rb.T, compute_uv=False)


@dataclass
class RunTrace:
    optimizer: str
    cfg: FactorizationConfig
    steps: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    effective_ranks: list[float] = field(default_factory=list)
    sigma1: list[float] = field(default_factory=list)
    diverged: bool = False

    def record(self, step: int, loss: float, a: np.ndarray, b: np.ndarray):
        sv = product_singular_values(a, b)
        erank, _ = entropy_rank(sv)
        self.steps.append(step)
        self.losses.append(loss)
        self.effective_ranks.append(erank)
        self.sigma1.append(float(sv[0]))

    def rank_at(self, step: int) -> float:
        """Effective rank at the latest recorded step <= step."""
        best = self.effective_ranks[0]
        for s, r in zip(self.steps, self.effective_ranks):
            if s > step:
                break
            best = r
        return best


class _ProbeHook:
    """Callback invoked at designated steps during a factorization run."""

    def __init__(self, steps, fn):
        self.steps = set(steps)
        self.fn = fn

    def maybe(self, step, a, b, w_star):
        if step in self.steps:
            self.fn(step, a, b, w_star)


def run_factorization(
    cfg: FactorizationConfig,
    optimizer: str = "muon",
    record_every: int = 10,
    hyper: dict | None = None,
    hook: _ProbeHook | None = None,
) -> RunTrace:
    """Train the factors for cfg.steps batches and record the trajectory.

    The hook (used by the landscape probe) fires before the step at each
    of its designated step indices; it must not touch the training RNG
    stream or optimizer state.
    """
    if optimizer not in ("muon", "adamw"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    base = MUON_MATFAC_HYPER if optimizer == "muon" else ADAMW_MATFAC_HYPER
    merged = {**base, **(hyper or {})}
    rng = make_stream(cfg.seed, "matfac-train", f"d={cfg.d}", f"kappa={cfg.kappa!r}")
    w_star = build_target(cfg.d, cfg.kappa, cfg.sigma_max, rng)
    a, b = init_factors(cfg, rng)
    shape = (cfg.d, cfg.rank_capacity)
    if optimizer == "muon":
        state_a = MuonState.fresh(shape, **merged)
        state_b = MuonState.fresh(shape, **merged)
    else:
        state_a = AdamState.fresh(shape, **merged)
        state_b = AdamState.fresh(shape, **merged)
    schedule = cfg.resolved_schedule()
    trace = RunTrace(optimizer=optimizer, cfg=cfg)
    x, y = sample_batch(cfg, w_star, rng)
    loss0, _, _ = loss_and_grads(a, b, x, y)
    trace.record(0, loss0, a, b)
    for step in range(cfg.steps):
        if hook is not None:
            hook.maybe(step, a, b, w_star)
        x, y = sample_batch(cfg, w_star, rng)
        loss, ga, gb = loss_and_grads(a, b, x, y)
        if not math.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            trace.diverged = True
            break
        # schedules may decay to exactly zero at the last step
        scale = max(lr_at(schedule, step), 1e-12)
        if optimizer == "muon":
            a, _ = muon_step(a, ga, state_a, lr_scale=scale)
            b, _ = muon_step(b, gb, state_b, lr_scale=scale)
        else:
            a, _ = adamw_step(a, ga, state_a, lr_scale=scale)
            b, _ = adamw_step(b, gb, state_b, lr_scale=scale)
        t = step + 1
        if t % record_every == 0 or t == cfg.steps:
            x_r, y_r = x, y  # report the training-batch loss
            trace.record(t, loss_and_grads(a, b, x_r, y_r)[0], a, b)
    if hook is not None:
        hook.maybe(cfg.steps, a, b, w_star)
    return trace


def write_trace_csv(trace: RunTrace, path):
    lines = ["step,loss,effective_rank,sigma1"]
    for s, l, er, s1 in zip(
        trace.steps, trace.losses, trace.effective_ranks, trace.sigma1
    ):
        lines.append(f"{s},{l!r},{er!r},{s1!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
