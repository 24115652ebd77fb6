"""Cut reuse across a Pareto sweep versus cold starts at every epsilon.

    python scripts/epm_ablation.py [--n 500] [--rules 200] [--k 15] [--count 50]

Reports wall time, cuts generated and the largest objective difference
between the two sweeps on a forest-generated rule pool.
"""

from __future__ import annotations

import argparse
import time

from moss.instances import forest_instance
from moss.solver import compute_pareto, epsilon_sequence


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--p", type=int, default=6)
    ap.add_argument("--rules", type=int, default=200)
    ap.add_argument("--k", type=int, default=15)
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    pool, pm, y = forest_instance(args.n, args.p, args.rules, seed=args.seed, forest_seed=args.seed + 1)
    eps = epsilon_sequence(pool, args.k).values[: args.count]
    runs = {}
    for label, reuse in (("reuse", True), ("cold", False)):
        t = time.perf_counter()
        runs[label] = compute_pareto(pool, pm, y, args.k, eps, reuse_cuts=reuse)
        print(f"{label:6s} {time.perf_counter() - t:8.2f}s  cuts {runs[label].cuts_generated}")
    diff = max(abs(a.h2 - b.h2) for a, b in zip(runs["reuse"].points, runs["cold"].points))
    print(f"max objective difference {diff:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
