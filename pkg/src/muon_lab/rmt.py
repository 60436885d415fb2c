"""Monte-Carlo random-matrix checks.

Three measurable claims: the scaling factor C = sqrt(D)/||noise||_F
concentrates at 1 for unit-variance noise; the top singular subspace of
a rank-1 spike plus noise stays aligned with the planted direction at a
rate governed by the spike strength, roughly independent of dimension;
and total noise energy grows linearly in the parameter count D.
"""

import json
from dataclasses import dataclass

import numpy as np

from .rng import make_stream

__all__ = [
    "ConcentrationReport",
    "AngleReport",
    "EnergyReport",
    "concentration_experiment",
    "subspace_angle_experiment",
    "energy_scaling_experiment",
]


@dataclass(frozen=True)
class ConcentrationReport:
    d: int
    n_samples: int
    mean_ct: float
    std_ct: float
    min_ct: float
    max_ct: float

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class AngleReport:
    lambda_s: float
    noise_scale: float
    d: int
    trials: int
    mean_sin_angle: float
    std_sin_angle: float

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class EnergyReport:
    d_values: tuple[int, ...]
    mean_energies: tuple[float, ...]
    loglog_slope: float
    projected_variance: float  # mean <Xi, E_11>^2 at the largest d

    def as_dict(self):
        return {
            "d_values": list(self.d_values),
            "mean_energies": list(self.mean_energies),
            "loglog_slope": self.loglog_slope,
            "projected_variance": self.projected_variance,
        }


def _unit_noise(d: int, mode: str, rng: np.random.Generator) -> np.ndarray:
    """Unit-entry-variance d x d noise draw."""
    if mode == "standard":
        return rng.standard_normal((d, d))
    if mode == "heavy_tail":
        df = 3.0
        return rng.standard_t(df, size=(d, d)) / np.sqrt(df / (df - 2.0))
    raise ValueError(f"unknown noise mode {mode!r}")


def concentration_experiment(
    d: int, n_samples: int, noise_mode: str = "standard", seed: int = 0
) -> ConcentrationReport:
    """Statistics of C = sqrt(D)/||Xi||_F over unit-variance noise draws,
    with D = d*d the full parameter count."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    rng = make_stream(seed, "rmt-concentration", f"d={d}", noise_mode)
    sqrt_big_d = float(d)  # sqrt(d^2)
    cts = np.empty(n_samples)
    for i in range(n_samples):
        cts[i] = sqrt_big_d / np.linalg.norm(_unit_noise(d, noise_mode, rng))
    return ConcentrationReport(
        d=d,
        n_samples=n_samples,
        mean_ct=float(cts.mean()),
        std_ct=float(cts.std(ddof=1)),
        min_ct=float(cts.min()),
        max_ct=float(cts.max()),
    )


def subspace_angle_experiment(
    lambda_s: float, d: int, trials: int = 50, seed: int = 0
) -> AngleReport:
    """sin of the angle between a planted top-left singular vector and
    the top-left singular vector of spike + noise.

    Noise entries have variance 1/d, pinning the bulk operator-norm edge
    near 2 so lambda_s reads as a signal-to-edge ratio.
    """
    if lambda_s < 0:
        raise ValueError("lambda_s must be non-negative")
    rng = make_stream(seed, "rmt-angle", f"d={d}", f"lam={lambda_s!r}")
    sins = np.empty(trials)
    for i in range(trials):
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        mat = lambda_s * np.outer(u, v)
        mat += rng.standard_normal((d, d)) / np.sqrt(d)
        u_hat = np.linalg.svd(mat)[0][:, 0]
        overlap = min(abs(float(u @ u_hat)), 1.0)
        sins[i] = np.sqrt(1.0 - overlap * overlap)
    return AngleReport(
        lambda_s=lambda_s,
        noise_scale=1.0 / np.sqrt(d),
        d=d,
        trials=trials,
        mean_sin_angle=float(sins.mean()),
        std_sin_angle=float(sins.std(ddof=1)),
    )


def energy_scaling_experiment(
    d_values=(32, 64, 128, 256, 512), samples_per_d: int = 200, seed: int = 0
) -> EnergyReport:
    """Mean ||Xi||_F^2 against D = d^2 on a log-log scale; the fitted
    slope should be 1 (energy linear in parameter count)."""
    d_values = tuple(int(d) for d in d_values)
    means = []
    for d in d_values:
        rng = make_stream(seed, "rmt-energy", f"d={d}")
        vals = [
            float(np.sum(np.square(rng.standard_normal((d, d)))))
            for _ in range(samples_per_d)
        ]
        means.append(float(np.mean(vals)))
    big_d = np.array([d * d for d in d_values], dtype=np.float64)
    slope = float(np.polyfit(np.log(big_d), np.log(means), 1)[0])
    # variance of the projection onto a single coordinate direction,
    # which stays O(1) regardless of D
    d_top = d_values[-1]
    rng = make_stream(seed, "rmt-energy-projection", f"d={d_top}")
    proj = rng.standard_normal(samples_per_d * 4)  # <Xi, E_11> = Xi[0,0]
    return EnergyReport(
        d_values=d_values,
        mean_energies=tuple(means),
        loglog_slope=slope,
        projected_variance=float(np.mean(proj * proj)),
    )
