"""Benchmark the compiled grid kernels against the NumPy fallback.

Usage:
    python benchmarks/compare_backends.py [--grid-n 1601] [--repeats 200]

Times the individual kernels and one full meta-order replica per backend,
and prints the speedups.  The replica loop is where the compiled backend
pays off: one fused C pass per filter step instead of several NumPy
kernel launches and temporaries.
"""

from __future__ import annotations

import argparse
import math
import os
import time

import numpy as np


def time_call(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, repeats):
    from quotefilter._backend import available_backends, get_backend

    x0, dx = -1.2, 2.4 / (n - 1)
    x = x0 + dx * np.arange(n)
    u = np.exp(-0.5 * (x / 0.05) ** 2)
    c = x0 + 0.5 * dx * (n - 1)
    ax = 5.0 * (x - c)
    exp_ax, inv_exp_ax = np.exp(ax), np.exp(-ax)

    rows = {}
    for name in available_backends():
        k = get_backend(name)
        work = u.copy()
        rows[name] = {
            "cn_diffuse": time_call(lambda: k.cn_diffuse(u, 0.5), repeats),
            "decay": time_call(
                lambda: k.decay_inplace(work, x0, dx, -0.1, 0.1, 50.0, 5.0, 1e-4), repeats
            ),
            "filter_step": time_call(
                lambda: k.filter_step(
                    work, 0.5, exp_ax, inv_exp_ax, 30.0, 30.0, 1e-4, x0, dx
                ),
                repeats,
            ),
            "moments": time_call(lambda: k.moments(u, x0, dx), repeats),
        }
    return rows


def bench_replica(grid_n):
    from quotefilter import ExpIntensity, GaussianPrior
    from quotefilter.impact import ImpactExperiment, _replica_impacts

    exp = ImpactExperiment(
        intensity=ExpIntensity(50.0, 5.0),
        half_spread=0.1,
        sigma=0.06,
        prior=GaussianPrior(100.0, 0.05),
        s0=100.0,
        beta=10.0,
        horizon_T=2.5,
        horizon=2.5,
        replicas=1,
        seed=20260810,
        grid_n=grid_n,
        w_clip=5.0,
    )
    t0 = time.perf_counter()
    out = _replica_impacts(exp, 0)
    return time.perf_counter() - t0, float(out[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid-n", type=int, default=1601)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    from quotefilter._backend import available_backends

    names = available_backends()
    print(f"backends available: {names} (grid n = {args.grid_n})\n")

    rows = bench_kernels(args.grid_n, args.repeats)
    kernels = ["cn_diffuse", "decay", "filter_step", "moments"]
    header = f"{'kernel':<14}" + "".join(f"{b:>14}" for b in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for kern in kernels:
        line = f"{kern:<14}"
        for b in names:
            line += f"{rows[b][kern] * 1e6:>12.1f}us"
        if len(names) == 2:
            line += f"{rows[names[1]][kern] / rows[names[0]][kern]:>9.1f}x"
        print(line)

    print("\nfull replica (2.5 s horizon, feedback loop, ~175 events):")
    results = {}
    for b in names:
        os.environ["QUOTEFILTER_BACKEND"] = b
        # the backend is chosen at import time; re-run in a fresh process
        import subprocess
        import sys

        code = (
            "import sys; sys.argv=['x']; "
            f"from benchmarks.compare_backends import bench_replica; "
            f"t, v = bench_replica({args.grid_n}); print(f'{{t:.3f}} {{v:.6f}}')"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={**os.environ, "QUOTEFILTER_BACKEND": b, "PYTHONPATH": os.getcwd()},
            cwd=os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
        )
        if out.returncode != 0:
            print(f"  {b:<10} failed: {out.stderr.strip().splitlines()[-1]}")
            continue
        t, v = out.stdout.split()
        results[b] = float(t)
        print(f"  {b:<10} {float(t):>8.3f}s   (final impact {float(v):+.5f})")
    if len(results) == 2:
        a, b = names
        print(f"  replica speedup: {results[b] / results[a]:.1f}x")


if __name__ == "__main__":
    main()
