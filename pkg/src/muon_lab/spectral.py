"""Dense matrix spectral utilities and the Newton-Schulz matrix iteration."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DecompositionError, IterationOverflowError
from .poly import DEFAULT_COEFFS, PolyCoeffs

__all__ = [
    "SvdFactors",
    "as_matrix",
    "frobenius_norm",
    "thin_svd",
    "operator_norm",
    "singular_values",
    "effective_rank",
    "normalized_spectral_entropy",
    "entropy_rank",
    "newton_schulz",
]


def as_matrix(m) -> np.ndarray:
    """Validate and return a 2-D float64 array with finite entries."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite entries")
    return arr


def frobenius_norm(m) -> float:
    """sqrt of the sum of squared entries."""
    return float(np.linalg.norm(as_matrix(m)))


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD with a fixed sign convention.

    left_vectors is m x k, right_vectors is n x k, k = min(m, n);
    singular values non-increasing. The largest-magnitude entry of each
    left vector is positive, which makes the factorization deterministic
    wherever singular values are simple.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def thin_svd(m) -> SvdFactors:
    """Thin SVD via LAPACK with the sign convention applied."""
    arr = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(arr, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge: {exc}") from exc
    v = vt.T
    # flip column pairs so each left vector's largest-|entry| is positive
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return SvdFactors(u * signs, s, v * signs)


def singular_values(m) -> np.ndarray:
    arr = as_matrix(m)
    try:
        return np.linalg.svd(arr, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge: {exc}") from exc


def operator_norm(m) -> float:
    """Largest singular value."""
    return float(singular_values(m)[0])


def entropy_rank(sigma: np.ndarray) -> tuple[float, float]:
    """(exp-entropy effective rank, raw Shannon entropy) of a spectrum.

    Weights are the singular values themselves, normalized to a
    probability vector; zero singular values carry zero weight.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    total = sigma.sum()
    if total <= 0:
        raise ValueError("spectrum is identically zero")
    p = sigma[sigma > 0] / total
    h = float(-(p * np.log(p)).sum())
    return float(np.exp(h)), h


def effective_rank(m) -> float:
    """exp of the Shannon entropy of the normalized singular spectrum."""
    return entropy_rank(singular_values(m))[0]


def normalized_spectral_entropy(m) -> float:
    """Spectral entropy divided by log(min(rows, cols)); 1.0 for 1x1."""
    arr = as_matrix(m)
    k = min(arr.shape)
    _, h = entropy_rank(singular_values(arr))
    if k == 1:
        return 1.0
    return h / float(np.log(k))


def newton_schulz(
    x0, coeffs: PolyCoeffs = DEFAULT_COEFFS, steps: int = 5
) -> np.ndarray:
    """Iterate X <- aX + b(XX^T)X + c(XX^T)^2 X for `steps` rounds.

    Wide orientation is enforced internally (the Gram matrix stays at
    min-dimension size); tall inputs are transposed in and back out.
    Intermediates are not renormalized.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = as_matrix(x0)
    a, b, c = coeffs.as_tuple()
    transposed = x.shape[0] > x.shape[1]
    if transposed:
        x = x.T
    x = np.ascontiguousarray(x)
    for step in range(1, steps + 1):
        x = _kernels.ns_apply(x, a, b, c, 1)
        if not np.all(np.isfinite(x)):
            raise IterationOverflowError(
                f"Newton-Schulz iterate diverged at step {step}", step=step
            )
    return x.T if transposed else x
