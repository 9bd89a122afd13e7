"""Compare the compiled and pure-Python stepping kernels.

    python benchmarks/bench_kernels.py [--repeat 3] [--sizes 4 20 80]
"""
import argparse
import math
import time

import numpy as np

from floqelim._backend import BACKENDS
from floqelim.evolve import _bond_table
from floqelim.model import LatticeConfig


def _config(n_sites):
    period = 2 * math.pi / (0.6 * 0.12)
    return LatticeConfig(n_sites, 0.03, 0.0, 0.02, period=period)


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 20, 80])
    args = parser.parse_args(argv)

    names = sorted(BACKENDS)
    print(f"{'N':>4} {'task':<10}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for n in args.sizes:
        cfg = _config(n)
        dz = cfg.period / args.steps
        table = _bond_table(cfg, 0.0, args.steps, dz)
        psi0 = np.zeros(n, dtype=complex)
        psi0[0] = 1
        keep = np.arange(args.steps + 1, dtype=np.int64)
        tasks = {
            "monodromy": lambda k: k.chain_product(table, dz),
            "propagate": lambda k: k.chain_propagate(table, dz, psi0, keep),
        }
        for task, fn in tasks.items():
            t = {name: best_time(lambda: fn(BACKENDS[name]), args.repeat) for name in names}
            row = f"{n:>4} {task:<10}" + "".join(f"{t[name]:>11.4f}s" for name in names)
            if "compiled" in t:
                row += f"{t['python'] / t['compiled']:>9.1f}x"
            print(row)
        if "compiled" in BACKENDS:
            a = BACKENDS["python"].chain_product(table, dz)
            b = BACKENDS["compiled"].chain_product(table, dz)
            print(f"{'':>4} max |U_python - U_compiled| = {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
