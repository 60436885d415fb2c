"""Compare the numba kernel backend against the pure-numpy fallback.

Run directly:  python benchmarks/bench_kernels.py
Backend selection happens at import time, so each backend is timed in a
fresh subprocess with MUON_LAB_BACKEND set accordingly.
"""

import json
import os
import subprocess
import sys
import time

WORKLOADS = ("ns", "adamw", "muon")


def _time_backend(backend: str) -> dict:
    env = dict(os.environ, MUON_LAB_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, __file__, "--worker"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout)


def _worker() -> dict:
    import numpy as np

    from muon_lab import _kernels
    from muon_lab.escape import run_trial
    from muon_lab.landscape import SaddleConfig

    results = {"backend": _kernels.BACKEND}
    rng = np.random.default_rng(0)

    # Newton-Schulz iterate, 256x256, 5 steps x 50 repeats
    x = rng.standard_normal((256, 256))
    x /= np.linalg.norm(x)
    _kernels.ns_apply(np.ascontiguousarray(x), 3.4445, -4.7750, 2.0315, 5)  # warm up
    t0 = time.perf_counter()
    for _ in range(50):
        _kernels.ns_apply(np.ascontiguousarray(x), 3.4445, -4.7750, 2.0315, 5)
    results["ns"] = time.perf_counter() - t0

    # streaming AdamW escape, d=128, 20k steps (budget-bound, no escape)
    cfg = SaddleConfig(d=128, lam=1e-6, kappa=100.0, r0=1e9)
    run_trial(cfg, "adamw", max_steps=100, seed=0)  # warm up
    t0 = time.perf_counter()
    run_trial(cfg, "adamw", max_steps=20_000, seed=0)
    results["adamw"] = time.perf_counter() - t0

    # streaming Muon escape, d=128, 2k steps
    run_trial(cfg, "muon", max_steps=50, seed=0)  # warm up
    t0 = time.perf_counter()
    run_trial(cfg, "muon", max_steps=2_000, seed=0)
    results["muon"] = time.perf_counter() - t0
    return results


def main():
    if "--worker" in sys.argv:
        print(json.dumps(_worker()))
        return
    rows = [_time_backend("numpy"), _time_backend("numba")]
    print(f"{'workload':<10} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for key in WORKLOADS:
        np_t, nb_t = rows[0][key], rows[1][key]
        print(f"{key:<10} {np_t:>10.3f} {nb_t:>10.3f} {np_t / nb_t:>7.2f}x")


if __name__ == "__main__":
    main()
