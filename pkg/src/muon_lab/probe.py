"""Two-direction loss-landscape probing.

At a frozen training state, the averaged exact gradient is decomposed by
SVD; the top singular pair gives the structural direction d_alpha and a
deep-bulk pair gives d_beta. The loss is scanned on a grid over
span(d_alpha, d_beta) with a frozen set of evaluation batches so that
surface differences reflect geometry, not sampling. The probe draws from
its own RNG stream and never perturbs training state.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateBulkError
from .matfac import (
    FactorizationConfig,
    RunTrace,
    _ProbeHook,
    loss_and_grads,
    run_factorization,
    sample_batch,
)
from .rng import make_stream
from .spectral import entropy_rank, thin_svd

__all__ = [
    "ProbeConfig",
    "LossSurface",
    "extract_directions",
    "grid_scan",
    "probe_at_checkpoints",
    "write_surface_csv",
    "write_surface_sidecar",
]


@dataclass(frozen=True)
class ProbeConfig:
    grid_points: int = 41
    scale_range: float = 1.0
    bulk_index: int | None = None  # None -> min(500, min(m, n) - 1)
    svd_batches: int = 50
    eval_batches: int = 10

    def __post_init__(self):
        if self.grid_points < 1 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be odd and positive")
        if self.scale_range <= 0:
            raise ValueError("scale_range must be positive")
        if self.svd_batches < 1 or self.eval_batches < 1:
            raise ValueError("batch counts must be positive")

    def resolved_bulk_index(self, shape: tuple[int, int]) -> int:
        if self.bulk_index is not None:
            return self.bulk_index
        return min(500, min(shape) - 1)


@dataclass(frozen=True)
class LossSurface:
    alphas: np.ndarray
    betas: np.ndarray
    losses: np.ndarray  # [i, j] = loss at (alphas[i], betas[j]); NaN = failed
    spike_range: float
    center_loss: float


def extract_directions(
    g_exact: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm rank-1 probe directions from a gradient's SVD.

    d_alpha = u_1 v_1^T (structural); d_beta uses the singular pair at
    0-based index k (bulk). Requires sigma_k above numerical zero.
    """
    factors = thin_svd(g_exact)
    if not 0 <= k < len(factors.singular_values):
        raise ValueError(f"bulk index {k} out of range")
    if factors.singular_values[k] < 1e-14:
        raise DegenerateBulkError(
            f"singular value at bulk index {k} is numerically zero"
        )
    u, v = factors.left_vectors, factors.right_vectors
    d_alpha = np.outer(u[:, 0], v[:, 0])
    d_beta = np.outer(u[:, k], v[:, k])
    # uv^T already has unit Frobenius norm; normalize anyway for safety
    d_alpha /= np.linalg.norm(d_alpha)
    d_beta /= np.linalg.norm(d_beta)
    return d_alpha, d_beta


def grid_scan(
    loss_eval,
    w_center: np.ndarray,
    d_alpha: np.ndarray,
    d_beta: np.ndarray,
    cfg: ProbeConfig,
) -> LossSurface:
    """Evaluate loss_eval over the (alpha, beta) grid.

    loss_eval maps a perturbed matrix to a scalar loss over an already
    frozen batch set; evaluation failures at single grid points become
    NaN entries and the scan continues. w_center is never mutated.
    """
    n = cfg.grid_points
    alphas = np.linspace(-cfg.scale_range, cfg.scale_range, n)
    betas = np.linspace(-cfg.scale_range, cfg.scale_range, n)
    losses = np.full((n, n), np.nan)
    for i, alpha in enumerate(alphas):
        for j, beta in enumerate(betas):
            try:
                losses[i, j] = float(
                    loss_eval(w_center + alpha * d_alpha + beta * d_beta)
                )
            except Exception:
                pass  # recorded as missing
    center = n // 2
    row = losses[:, center]  # beta = 0, alpha varying
    finite = row[np.isfinite(row)]
    spike_range = float(finite.max() - finite.min()) if finite.size else float("nan")
    return LossSurface(
        alphas=alphas,
        betas=betas,
        losses=losses,
        spike_range=spike_range,
        center_loss=float(losses[center, center]),
    )


@dataclass(frozen=True)
class CheckpointProbe:
    step: int
    surface: LossSurface
    effective_rank: float  # of the probed factor matrix A


def probe_at_checkpoints(
    cfg: FactorizationConfig,
    checkpoints,
    probe_cfg: ProbeConfig | None = None,
    optimizer: str = "muon",
    record_every: int = 50,
) -> tuple[RunTrace, list[CheckpointProbe]]:
    """Run a factorization and probe factor A at the given steps.

    Probe batches come from a dedicated RNG stream, so the training
    trajectory is bit-identical to an unprobed run.
    """
    probe_cfg = probe_cfg or ProbeConfig()
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if checkpoints and (checkpoints[0] < 0 or checkpoints[-1] > cfg.steps):
        raise ValueError("checkpoints must lie within the run horizon")
    results: list[CheckpointProbe] = []

    def probe(step, a, b, w_star):
        prng = make_stream(cfg.seed, "matfac-probe", f"step={step}")
        # averaged exact gradient of A over fresh probe batches
        g_sum = np.zeros_like(a)
        for _ in range(probe_cfg.svd_batches):
            x, y = sample_batch(cfg, w_star, prng)
            _, ga, _ = loss_and_grads(a, b, x, y)
            g_sum += ga
        g_avg = g_sum / probe_cfg.svd_batches
        k = probe_cfg.resolved_bulk_index(a.shape)
        d_alpha, d_beta = extract_directions(g_avg, k)
        eval_batches = [
            sample_batch(cfg, w_star, prng) for _ in range(probe_cfg.eval_batches)
        ]
        # B is frozen during an A-scan, so x @ B can be precomputed once
        frozen = [(x @ b, y, x.shape[0]) for x, y in eval_batches]

        def loss_eval(a_perturbed):
            total = 0.0
            for xb, y, batch in frozen:
                r = xb @ a_perturbed.T - y
                total += float(np.sum(r * r)) / (2.0 * batch)
            return total / len(frozen)

        surface = grid_scan(loss_eval, a, d_alpha, d_beta, probe_cfg)
        erank, _ = entropy_rank(np.linalg.svd(a, compute_uv=False))
        results.append(CheckpointProbe(step=step, surface=surface, effective_rank=erank))

    hook = _ProbeHook(checkpoints, lambda step, a, b, w_star: probe(step, a, b, w_star))
    trace = run_factorization(cfg, optimizer=optimizer, record_every=record_every, hook=hook)
    return trace, results


def write_surface_csv(surface: LossSurface, path):
    lines = ["alpha,beta,loss"]
    for i, alpha in enumerate(surface.alphas):
        for j, beta in enumerate(surface.betas):
            val = surface.losses[i, j]
            txt = "" if not np.isfinite(val) else repr(float(val))
            lines.append(f"{float(alpha)!r},{float(beta)!r},{txt}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_surface_sidecar(probe: CheckpointProbe, path):
    payload = {
        "step": probe.step,
        "spike_range": probe.surface.spike_range,
        "center_loss": probe.surface.center_loss,
        "effective_rank": probe.effective_rank,
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
