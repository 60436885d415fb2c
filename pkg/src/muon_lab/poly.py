"""Scalar odd-quintic analysis for the Newton-Schulz iteration polynomial.

The matrix iteration acts on each singular value through the scalar map
rho(x) = a*x + b*x^3 + c*x^5.  This module verifies the three numerical
facts the optimizer relies on: small singular values are amplified ~485x
per five iterations, mid-range values are bounded away from zero, and
[0.6, 1.205] is forward-invariant; plus a coefficient-perturbation
robustness radius for the invariance property.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import IterationOverflowError

__all__ = [
    "PolyCoeffs",
    "DEFAULT_COEFFS",
    "DEFAULT_INTERVAL",
    "rho",
    "scaling_factor",
    "rho_iter",
    "critical_points",
    "verify_invariance",
    "verify_amplification",
    "verify_floor",
    "robustness_radius",
    "amplification_threshold",
    "InvarianceReport",
    "AmplificationReport",
    "FloorReport",
    "RobustnessReport",
]


@dataclass(frozen=True)
class PolyCoeffs:
    """Coefficients of the odd quintic rho(x) = a*x + b*x^3 + c*x^5."""

    a: float = 3.4445
    b: float = -4.7750
    c: float = 2.0315

    def __post_init__(self):
        for name in ("a", "b", "c"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient {name} must be finite")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


DEFAULT_COEFFS = PolyCoeffs()

# Forward-invariant interval for the default coefficients.
DEFAULT_INTERVAL = (0.6, 1.205)

# Amplification must hold down to this rate over five iterations.
AMPLIFICATION_TARGET = 483.0
FLOOR_TARGET = 0.03
FLOOR_DOMAIN = (0.0001, 0.6)


def rho(x, coeffs: PolyCoeffs = DEFAULT_COEFFS):
    """Evaluate the quintic. Accepts scalars or numpy arrays; exactly odd."""
    x2 = x * x
    return x * (coeffs.a + x2 * (coeffs.b + coeffs.c * x2))


def scaling_factor(x, coeffs: PolyCoeffs = DEFAULT_COEFFS):
    """h(x) = rho(x)/x = a + b*x^2 + c*x^4, extended by continuity at 0."""
    x2 = x * x
    return coeffs.a + x2 * (coeffs.b + coeffs.c * x2)


def rho_iter(x, k: int, coeffs: PolyCoeffs = DEFAULT_COEFFS):
    """k-fold composition rho^(k)(x); k = 0 returns x unchanged."""
    if k < 0:
        raise ValueError("iteration count must be non-negative")
    for step in range(1, k + 1):
        x = rho(x, coeffs)
        if not np.all(np.isfinite(x)):
            raise IterationOverflowError(
                f"polynomial iterate diverged at step {step}", step=step
            )
    return x


def critical_points(coeffs: PolyCoeffs = DEFAULT_COEFFS) -> list[float]:
    """Positive roots of rho'(x) = a + 3b*x^2 + 5c*x^4, ascending.

    Solved as a quadratic in x^2. Returns [] when rho is monotone on
    (0, inf). Degenerate c = 0 falls back to the linear equation in x^2.
    """
    a, b, c = coeffs.as_tuple()
    if c == 0.0:
        if b == 0.0:
            return []
        t = -a / (3.0 * b)
        return [math.sqrt(t)] if t > 0 else []
    # 5c t^2 + 3b t + a = 0 with t = x^2
    disc = 9.0 * b * b - 20.0 * a * c
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    roots = [(-3.0 * b - sq) / (10.0 * c), (-3.0 * b + sq) / (10.0 * c)]
    return sorted(math.sqrt(t) for t in roots if t > 0)


class InvarianceReport(NamedTuple):
    interval_lo: float
    interval_hi: float
    image_lo: float
    image_hi: float
    invariant: bool
    critical_points: tuple[float, ...]


def verify_invariance(
    coeffs: PolyCoeffs = DEFAULT_COEFFS,
    lo: float = DEFAULT_INTERVAL[0],
    hi: float = DEFAULT_INTERVAL[1],
) -> InvarianceReport:
    """Check rho([lo, hi]) is contained in [lo, hi].

    Image extrema are exact: evaluated at the endpoints and at interior
    critical points of rho, no sampling involved.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    crits = tuple(x for x in critical_points(coeffs) if lo < x < hi)
    values = [rho(lo, coeffs), rho(hi, coeffs)] + [rho(x, coeffs) for x in crits]
    image_lo, image_hi = min(values), max(values)
    return InvarianceReport(
        interval_lo=lo,
        interval_hi=hi,
        image_lo=image_lo,
        image_hi=image_hi,
        invariant=(image_lo >= lo and image_hi <= hi),
        critical_points=crits,
    )


class AmplificationReport(NamedTuple):
    passed: bool
    min_ratio: float
    threshold: float  # upper end of the tested domain, 0.02/a^4


def amplification_threshold(coeffs: PolyCoeffs = DEFAULT_COEFFS) -> float:
    """delta_0 = 0.02/a^4, the small-value domain boundary."""
    return 0.02 / coeffs.a**4


def verify_amplification(
    coeffs: PolyCoeffs = DEFAULT_COEFFS, grid_size: int = 10_000
) -> AmplificationReport:
    """Check rho^(5)(x) >= 483*x on (0, 0.02/a^4], log-spaced grid."""
    if grid_size < 100:
        raise ValueError("grid_size must be >= 100")
    delta0 = amplification_threshold(coeffs)
    xs = np.logspace(-12, math.log10(delta0), grid_size)
    try:
        ratios = rho_iter(xs, 5, coeffs) / xs
    except IterationOverflowError:
        return AmplificationReport(False, float("-inf"), delta0)
    min_ratio = float(ratios.min())
    return AmplificationReport(min_ratio >= AMPLIFICATION_TARGET, min_ratio, delta0)


class FloorReport(NamedTuple):
    passed: bool
    min_value: float


def verify_floor(
    coeffs: PolyCoeffs = DEFAULT_COEFFS, grid_size: int = 100_000
) -> FloorReport:
    """Check min of rho^(5) over [0.0001, 0.6] stays above 0.03."""
    if grid_size < 1000:
        raise ValueError("grid_size must be >= 1000")
    xs = np.linspace(FLOOR_DOMAIN[0], FLOOR_DOMAIN[1], grid_size)
    try:
        values = rho_iter(xs, 5, coeffs)
    except IterationOverflowError:
        return FloorReport(False, float("-inf"))
    min_value = float(values.min())
    return FloorReport(min_value > FLOOR_TARGET, min_value)


class RobustnessReport(NamedTuple):
    radius: float
    margin: float
    sup_bound: float  # M = sqrt(hi^2 + hi^6 + hi^10)
    certified: bool  # all sphere perturbations at 0.99*radius stay invariant


def _find_invariant_interval(
    coeffs: PolyCoeffs, lo: float, hi: float
) -> tuple[float, float] | None:
    """Search a small neighborhood of [lo, hi] for a forward-invariant
    subinterval of the perturbed polynomial; None if no candidate works."""
    for l in np.linspace(lo - 0.08, lo + 0.2, 29):
        if l <= 0:
            continue
        for h in np.linspace(hi + 0.12, hi - 0.3, 43):
            if h <= l:
                continue
            rep = verify_invariance(coeffs, float(l), float(h))
            if rep.invariant:
                return (float(l), float(h))
    return None


def robustness_radius(
    coeffs: PolyCoeffs = DEFAULT_COEFFS,
    lo: float = DEFAULT_INTERVAL[0],
    hi: float = DEFAULT_INTERVAL[1],
    n_certify: int = 64,
    seed: int = 0,
) -> RobustnessReport:
    """Coefficient-perturbation radius preserving forward invariance.

    The sup of |x|+|x^3|+|x^5| weights over [lo, hi] is bounded by
    M = sqrt(hi^2 + hi^6 + hi^10) (Cauchy-Schwarz), so a coefficient
    perturbation of Euclidean norm delta moves rho by at most delta*M on
    the interval. With gamma the lower inclusion margin image_lo - lo,
    radius = gamma/M. Certification: for n_certify perturbations of norm
    0.99*radius sampled uniformly on the coefficient sphere, a
    forward-invariant compact subinterval near [lo, hi] must still exist
    (the invariant set is allowed to deform under perturbation).
    """
    nominal = verify_invariance(coeffs, lo, hi)
    if not nominal.invariant:
        raise ValueError("nominal coefficients are not invariant on the interval")
    margin = nominal.image_lo - lo
    m_bound = math.sqrt(hi**2 + hi**6 + hi**10)
    radius = margin / m_bound
    certified = True
    if radius > 0 and n_certify > 0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB3]))
        raw = rng.standard_normal((n_certify, 3))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        for delta in raw * (0.99 * radius):
            perturbed = PolyCoeffs(
                coeffs.a + delta[0], coeffs.b + delta[1], coeffs.c + delta[2]
            )
            if _find_invariant_interval(perturbed, lo, hi) is None:
                certified = False
                break
    return RobustnessReport(radius, margin, m_bound, certified)
