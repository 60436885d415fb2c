"""Single-matrix optimizer step rules: orthogonalized-momentum Muon and AdamW.

Muon accumulates raw momentum B <- mu*B + G, normalizes it globally by
its Frobenius norm, runs the quintic Newton-Schulz iteration to push the
spectrum toward 1, and applies the result scaled by 0.2*eta*sqrt(d) with
d = max(rows, cols). AdamW is the standard decoupled-weight-decay update.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .poly import DEFAULT_COEFFS, PolyCoeffs
from .spectral import newton_schulz, singular_values

__all__ = [
    "MuonState",
    "AdamState",
    "LrSchedule",
    "muon_step",
    "adamw_step",
    "lr_at",
    "MUON_UPDATE_SCALE",
]

# Update prefactor from the Muon step rule W <- W - 0.2*eta*sqrt(d)*X.
# Kept as a named module constant so it is configurable in one place.
MUON_UPDATE_SCALE = 0.2


@dataclass
class MuonState:
    momentum: np.ndarray
    mu: float = 0.95
    eta: float = 0.02
    coeffs: PolyCoeffs = DEFAULT_COEFFS
    ns_steps: int = 5
    norm_guard: float = 1e-12
    weight_decay: float = 0.0
    update_scale: float = MUON_UPDATE_SCALE

    def __post_init__(self):
        self.momentum = np.asarray(self.momentum, dtype=np.float64)
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must be in (0, 1)")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @classmethod
    def fresh(cls, shape: tuple[int, int], **kwargs) -> "MuonState":
        return cls(momentum=np.zeros(shape), **kwargs)


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    eta: float = 3e-4
    weight_decay: float = 0.0
    step_count: int = 0

    def __post_init__(self):
        self.first_moment = np.asarray(self.first_moment, dtype=np.float64)
        self.second_moment = np.asarray(self.second_moment, dtype=np.float64)
        if np.any(self.second_moment < 0):
            raise ValueError("second moment must be entrywise non-negative")

    @classmethod
    def fresh(cls, shape: tuple[int, int], **kwargs) -> "AdamState":
        return cls(first_moment=np.zeros(shape), second_moment=np.zeros(shape), **kwargs)


def _check_gradient(w: np.ndarray, g: np.ndarray):
    if g.shape != w.shape:
        raise ValueError(f"gradient shape {g.shape} != weight shape {w.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite gradient rejected")


def muon_step(
    w: np.ndarray,
    g: np.ndarray,
    s: MuonState,
    lr_scale: float = 1.0,
    want_sigma1: bool = False,
) -> tuple[np.ndarray, dict]:
    """One Muon update. Mutates s.momentum; returns (new w, diagnostics).

    Diagnostics carry the momentum Frobenius norm and, when requested,
    the top singular value of the normalized momentum X0 (used by the
    subspace-lock heuristic).
    """
    _check_gradient(w, g)
    if not 0.0 < lr_scale <= 1.0:
        raise ValueError("lr_scale must be in (0, 1]")
    s.momentum *= s.mu
    s.momentum += g
    norm = float(np.linalg.norm(s.momentum))
    diag = {"momentum_norm": norm}
    if norm == 0.0:
        # guard: exact zero momentum yields a zero update
        if want_sigma1:
            diag["sigma1_ratio"] = 0.0
        return w * (1.0 - lr_scale * s.eta * s.weight_decay), diag
    x0 = s.momentum / (norm + s.norm_guard)
    if want_sigma1:
        diag["sigma1_ratio"] = float(singular_values(x0)[0])
    x = newton_schulz(x0, s.coeffs, s.ns_steps)
    d = max(w.shape)
    w_new = w * (1.0 - lr_scale * s.eta * s.weight_decay)
    w_new -= s.update_scale * lr_scale * s.eta * math.sqrt(d) * x
    return w_new, diag


def adamw_step(
    w: np.ndarray, g: np.ndarray, s: AdamState, lr_scale: float = 1.0
) -> tuple[np.ndarray, dict]:
    """One decoupled-weight-decay Adam update. Mutates s; returns (w, diag)."""
    _check_gradient(w, g)
    s.step_count += 1
    t = s.step_count
    s.first_moment *= s.beta1
    s.first_moment += (1.0 - s.beta1) * g
    s.second_moment *= s.beta2
    s.second_moment += (1.0 - s.beta2) * (g * g)
    m_hat = s.first_moment / (1.0 - s.beta1**t)
    v_hat = s.second_moment / (1.0 - s.beta2**t)
    w_new = w * (1.0 - lr_scale * s.eta * s.weight_decay)
    w_new -= lr_scale * s.eta * m_hat / (np.sqrt(v_hat) + s.epsilon)
    return w_new, {"m_norm": float(np.linalg.norm(s.first_moment))}


@dataclass(frozen=True)
class LrSchedule:
    """Learning-rate multiplier schedule.

    constant: always 1.0. cosine-tail: 1.0 for the first hold_fraction of
    total_steps, then a cosine ramp from 1.0 down to floor_fraction.
    """

    kind: str = "constant"
    total_steps: int = 1
    hold_fraction: float = 0.9
    floor_fraction: float = 0.01

    def __post_init__(self):
        if self.kind not in ("constant", "cosine-tail"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 <= self.hold_fraction <= 1.0:
            raise ValueError("hold_fraction must be in [0, 1]")
        if self.floor_fraction > 1.0:
            raise ValueError("floor_fraction must be <= 1")
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")


def lr_at(schedule: LrSchedule, step: int) -> float:
    """Multiplier at a 0-based step index; step must be < total_steps."""
    if step < 0 or step >= schedule.total_steps:
        raise ValueError("step out of schedule range")
    if schedule.kind == "constant":
        return 1.0
    hold = schedule.hold_fraction * schedule.total_steps
    if step < hold:
        return 1.0
    tail = schedule.total_steps - hold
    frac = (step - hold) / max(tail - 1.0, 1.0)
    frac = min(frac, 1.0)
    lo = schedule.floor_fraction
    return lo + (1.0 - lo) * 0.5 * (1.0 + math.cos(math.pi * frac))
