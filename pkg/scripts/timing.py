"""Per-epsilon solve time of the exact solver on Gaussian instances.

    python scripts/timing.py [--n 150] [--m 250] [--k 15] [--count 10]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from moss.instances import gaussian_instance
from moss.solver import epsilon_sequence, solve_fixed_epsilon


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=150)
    ap.add_argument("--m", type=int, default=250)
    ap.add_argument("--k", type=int, default=15)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    pi, pm, y = gaussian_instance(args.n, args.m, args.k, seed=args.seed)
    E = epsilon_sequence(pi, args.k)
    print(f"epsilon sequence length {len(E)}")
    for i in np.linspace(0, len(E) - 1, args.count).astype(int):
        t = time.perf_counter()
        sol, _ = solve_fixed_epsilon(pi, pm, y, args.k, E.values[i])
        print(f"position {i + 1:6d}  eps {E.values[i]:.4f}  H2 {sol.h2:.6g}  "
              f"|S| {len(sol.support):2d}  {time.perf_counter() - t:.3f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
