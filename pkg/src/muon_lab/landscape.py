"""Synthetic spiked saddle landscape.

Stochastic gradients are anisotropic Gaussian noise with one elevated
(structural) variance entry at coordinate (0,0), plus a deterministic
rank-1 negative-curvature drift -lambda*W[0,0] acting on that same entry.
Two ablation modes replace the background noise: exactly-spherical
isotropic noise, and power-law-profiled Student-t heavy-tail noise.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SaddleConfig",
    "NOISE_MODES",
    "variance_matrix",
    "heavy_tail_sigma",
    "isotropic_background",
    "noise_chunk",
    "gen_gradient",
    "gen_gradient_ablation",
]

NOISE_MODES = ("standard", "isotropic", "heavy_tail")


@dataclass(frozen=True)
class SaddleConfig:
    """Full parameterization of one saddle-escape landscape."""

    d: int = 256
    lam: float = 1e-6
    kappa: float = 100.0
    sigma_ortho: float = 0.01
    r0: float = 1.0
    noise_mode: str = "standard"
    heavy_tail_alpha: float = 1.5
    heavy_tail_df: float = 3.0
    seed: int = 0
    # escape distance: "frobenius" = ||W||_F, "coordinate" = |W[0,0]|
    # (distance along the unstable structural direction)
    escape_metric: str = "frobenius"

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.sigma_ortho <= 0:
            raise ValueError("sigma_ortho must be positive")
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
        if self.noise_mode == "heavy_tail" and self.heavy_tail_df <= 2:
            raise ValueError("heavy_tail_df must exceed 2 (finite variance)")
        if self.escape_metric not in ("frobenius", "coordinate"):
            raise ValueError("escape_metric must be frobenius or coordinate")

    @property
    def eps0(self) -> float:
        """Background entry variance epsilon_0 = sigma_ortho^2."""
        return self.sigma_ortho**2


def variance_matrix(cfg: SaddleConfig) -> np.ndarray:
    """Entrywise gradient-noise variances: eps0 everywhere except the
    structural entry (0,0), which carries (kappa+1)*eps0."""
    sigma = np.full((cfg.d, cfg.d), cfg.eps0)
    sigma[0, 0] = cfg.kappa * cfg.eps0 + cfg.eps0
    return sigma


def heavy_tail_sigma(cfg: SaddleConfig) -> np.ndarray:
    """Per-entry standard deviations for heavy_tail mode.

    Background variances follow (1+i)^(-alpha) over the flattened entry
    index, normalized so the mean background variance equals eps0; the
    structural entry keeps its standard-mode variance (kappa+1)*eps0.
    """
    i = np.arange(cfg.d * cfg.d, dtype=np.float64)
    var = (1.0 + i) ** (-cfg.heavy_tail_alpha)
    var *= cfg.eps0 / var.mean()
    sig = np.sqrt(var).reshape(cfg.d, cfg.d)
    sig[0, 0] = np.sqrt((cfg.kappa + 1.0) * cfg.eps0)
    return sig


def isotropic_background(d: int, sigma_ortho: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian matrix rescaled to exact Frobenius norm sigma_ortho*d."""
    z = rng.standard_normal((d, d))
    return z * (sigma_ortho * d / np.linalg.norm(z))


def noise_chunk(cfg: SaddleConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    """Pregenerate n stochastic gradient matrices (drift NOT applied).

    Chunked generation keeps the draw sequence identical regardless of
    how callers batch their optimization loops.
    """
    d = cfg.d
    if cfg.noise_mode == "standard":
        out = rng.standard_normal((n, d, d))
        out *= np.sqrt(variance_matrix(cfg))
        return out
    if cfg.noise_mode == "heavy_tail":
        df = cfg.heavy_tail_df
        out = rng.standard_t(df, size=(n, d, d))
        out /= np.sqrt(df / (df - 2.0))  # unit variance before profiling
        out *= heavy_tail_sigma(cfg)
        return out
    # isotropic: exactly-spherical background plus the structural spike
    out = np.empty((n, d, d))
    spike_sd = np.sqrt(cfg.kappa * cfg.eps0)
    for k in range(n):
        out[k] = isotropic_background(d, cfg.sigma_ortho, rng)
        out[k, 0, 0] += spike_sd * rng.standard_normal()
    return out


def _with_drift(w: np.ndarray, cfg: SaddleConfig, g: np.ndarray) -> np.ndarray:
    g[0, 0] -= cfg.lam * w[0, 0]
    return g


def gen_gradient(w: np.ndarray, cfg: SaddleConfig, rng: np.random.Generator) -> np.ndarray:
    """One stochastic gradient in standard mode: sqrt(Sigma)*Z plus the
    rank-1 drift -lambda*w[0,0] at entry (0,0)."""
    if cfg.noise_mode != "standard":
        raise ValueError("gen_gradient is standard-mode; use gen_gradient_ablation")
    return _with_drift(w, cfg, noise_chunk(cfg, rng, 1)[0])


def gen_gradient_ablation(
    w: np.ndarray, cfg: SaddleConfig, rng: np.random.Generator
) -> np.ndarray:
    """One stochastic gradient in an ablation noise mode (same drift)."""
    if cfg.noise_mode == "standard":
        raise ValueError("ablation generator requires a non-standard noise_mode")
    return _with_drift(w, cfg, noise_chunk(cfg, rng, 1)[0])
