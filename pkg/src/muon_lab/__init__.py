"""Numerical laboratory for orthogonalized-momentum optimization.

Implements the Newton-Schulz orthogonalizing Muon optimizer and an AdamW
baseline, synthetic spiked-saddle escape experiments, a rank-trapped
matrix-factorization benchmark, scalar quintic polynomial verification,
loss-landscape probing, and random-matrix Monte-Carlo checks.
"""

__version__ = "0.1.0"

from .errors import (
    DecompositionError,
    DegenerateBulkError,
    IterationOverflowError,
)
from .poly import (
    PolyCoeffs,
    DEFAULT_COEFFS,
    rho,
    rho_iter,
    scaling_factor,
    critical_points,
    verify_invariance,
    verify_amplification,
    verify_floor,
    robustness_radius,
)
from .spectral import (
    frobenius_norm,
    thin_svd,
    operator_norm,
    effective_rank,
    normalized_spectral_entropy,
    newton_schulz,
)
from .optim import MuonState, AdamState, LrSchedule, muon_step, adamw_step, lr_at

__all__ = [
    "DecompositionError",
    "DegenerateBulkError",
    "IterationOverflowError",
    "PolyCoeffs",
    "DEFAULT_COEFFS",
    "rho",
    "rho_iter",
    "scaling_factor",
    "critical_points",
    "verify_invariance",
    "verify_amplification",
    "verify_floor",
    "robustness_radius",
    "frobenius_norm",
    "thin_svd",
    "operator_norm",
    "effective_rank",
    "normalized_spectral_entropy",
    "newton_schulz",
    "MuonState",
    "AdamState",
    "LrSchedule",
    "muon_step",
    "adamw_step",
    "lr_at",
]
