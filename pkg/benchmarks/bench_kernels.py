"""Timing of the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs once untimed (JIT compilation), then ``--repeat`` times; the
best wall time is reported together with the max abs difference between the
two backends' outputs.
"""

import argparse
import json
import time

import numpy as np

from tapersum import kernels
from tapersum.filters import FilterSpec, coefficients
from tapersum.rng import open_uniform, stream


def _best(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def _diff(x, y):
    if isinstance(x, tuple):
        return max(_diff(a, b) for a, b in zip(x, y))
    return float(np.max(np.abs(x - y)))


def cases():
    rng = stream(0, 0)
    u = open_uniform(rng, 2_000_000)
    u2 = open_uniform(rng, 2_000_000)
    n, J = 512, 512
    a = coefficients(FilterSpec.power_law(0.75), n + J)
    e = rng.standard_normal((8, n + J))
    return {
        "tp_quantile_array": (u, 1.5, 100.0),
        "coupled_transform": (u, u2, 1.5, 100.0),
        "direct_increments": (a, e, n, J),
    }


def run(repeat=5):
    rows = []
    for name, args in cases().items():
        t_np = _best(kernels.NUMPY_KERNELS[name], args, repeat)
        t_nb = _best(kernels.NUMBA_KERNELS[name], args, repeat)
        diff = _diff(kernels.NUMPY_KERNELS[name](*args), kernels.NUMBA_KERNELS[name](*args))
        rows.append({"kernel": name, "numpy_s": t_np, "numba_s": t_nb,
                     "speedup": t_np / t_nb, "max_abs_diff": diff})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write results here as well")
    args = ap.parse_args()
    rows = run(args.repeat)
    print(f"{'kernel':<20} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'max diff':>10}")
    for r in rows:
        print(f"{r['kernel']:<20} {r['numpy_s']:>10.4f} {r['numba_s']:>10.4f} "
              f"{r['speedup']:>8.2f} {r['max_abs_diff']:>10.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
