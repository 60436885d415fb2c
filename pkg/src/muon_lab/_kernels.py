"""Hot inner loops, JIT-compiled with numba when available.

Backend selection via the environment variable ``MUON_LAB_BACKEND``:

* ``auto`` (default) — numba if importable, else pure numpy
* ``numba`` — require numba, raise if missing
* ``numpy`` — force the pure-numpy reference path

Both backends implement identical arithmetic on float64 arrays. The
pure-numpy path is the reference; the numba path exists for the long
streaming escape loops (10^5-10^6 steps) where per-step Python overhead
dominates. ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

import numpy as np

_REQUESTED = os.environ.get("MUON_LAB_BACKEND", "auto").strip().lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise ValueError(f"MUON_LAB_BACKEND must be auto|numba|numpy, got {_REQUESTED!r}")

HAS_NUMBA = False
if _REQUESTED in ("auto", "numba"):
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        if _REQUESTED == "numba":
            raise

BACKEND = "numba" if HAS_NUMBA else "numpy"


def _py_ns_apply(x, a, b, c, steps):
    # Quintic Newton-Schulz iterate; caller guarantees rows <= cols.
    for _ in range(steps):
        g = x @ x.T
        x = a * x + (b * g + c * (g @ g)) @ x
    return x


def _py_adamw_escape_chunk(w, m, v, noise, drift_lam, eta, wd, b1, b2, eps, t0, r0):
    """Run AdamW steps over a pregenerated noise chunk; stop on escape.

    Mutates w, m, v in place. The drift term -lam*w[0,0] is folded into the
    (0,0) noise entry each step. Returns the 1-based global escape step, or
    -1 if the chunk is exhausted without escape.
    """
    n_steps = noise.shape[0]
    for k in range(n_steps):
        t = t0 + k + 1
        g = noise[k]
        g[0, 0] -= drift_lam * w[0, 0]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if wd != 0.0:
            w *= 1.0 - eta * wd
        w -= eta * (m / (1.0 - b1**t)) / (np.sqrt(v / (1.0 - b2**t)) + eps)
        if np.sqrt(np.sum(w * w)) >= r0:
            return t
    return -1


def _py_muon_escape_chunk(
    w, mom, noise, drift_lam, eta, mu, scale, a, b, c, ns_steps, guard, t0, r0
):
    """Muon steps over a pregenerated noise chunk (square matrices).

    scale is the full update prefactor 0.2*sqrt(d); mutates w and mom.
    Returns the 1-based global escape step or -1.
    """
    n_steps = noise.shape[0]
    for k in range(n_steps):
        t = t0 + k + 1
        g = noise[k]
        g[0, 0] -= drift_lam * w[0, 0]
        mom *= mu
        mom += g
        nrm = np.sqrt(np.sum(mom * mom))
        x = _py_ns_apply(mom / (nrm + guard), a, b, c, ns_steps)
        w -= eta * scale * x
        if np.sqrt(np.sum(w * w)) >= r0:
            return t
    return -1


if HAS_NUMBA:
    _nb_ns_apply = njit(cache=True)(_py_ns_apply)

    @njit(cache=True)
    def _nb_adamw_escape_chunk(w, m, v, noise, drift_lam, eta, wd, b1, b2, eps, t0, r0):
        n_steps, rows, cols = noise.shape
        for k in range(n_steps):
            t = t0 + k + 1
            noise[k, 0, 0] -= drift_lam * w[0, 0]
            bc1 = 1.0 - b1**t
            bc2 = 1.0 - b2**t
            decay = 1.0 - eta * wd
            s = 0.0
            for i in range(rows):
                for j in range(cols):
                    g = noise[k, i, j]
                    m[i, j] = b1 * m[i, j] + (1.0 - b1) * g
                    v[i, j] = b2 * v[i, j] + (1.0 - b2) * g * g
                    if wd != 0.0:
                        w[i, j] *= decay
                    w[i, j] -= eta * (m[i, j] / bc1) / (np.sqrt(v[i, j] / bc2) + eps)
                    s += w[i, j] * w[i, j]
            if np.sqrt(s) >= r0:
                return t
        return -1

    @njit(cache=True)
    def _nb_muon_escape_chunk(
        w, mom, noise, drift_lam, eta, mu, scale, a, b, c, ns_steps, guard, t0, r0
    ):
        n_steps = noise.shape[0]
        for k in range(n_steps):
            t = t0 + k + 1
            noise[k, 0, 0] -= drift_lam * w[0, 0]
            mom *= mu
            mom += noise[k]
            nrm = np.sqrt(np.sum(mom * mom))
            x = _nb_ns_apply(mom / (nrm + guard), a, b, c, ns_steps)
            w -= eta * scale * x
            if np.sqrt(np.sum(w * w)) >= r0:
                return t
        return -1

    ns_apply = _nb_ns_apply
    adamw_escape_chunk = _nb_adamw_escape_chunk
    muon_escape_chunk = _nb_muon_escape_chunk
else:
    ns_apply = _py_ns_apply
    adamw_escape_chunk = _py_adamw_escape_chunk
    muon_escape_chunk = _py_muon_escape_chunk
