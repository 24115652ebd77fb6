"""Ten-fold comparison of moss_h, moss_m and top-k on the galaxy table.

    python scripts/run_galaxy_cv.py [path/to/visualizing_galaxy.csv] [--target velocity]

Without a path the synthetic ``galaxy_like`` stand-in is used, which only
exercises the pipeline. Prints R2 mean, standard error and DSC stability
for each method and checks the reference bands.
"""

from __future__ import annotations

import argparse
import json
import time

from moss.data import Dataset, load_dataset
from moss.errors import SolverError
from moss.evaluation import ExperimentConfig, run_cv

from synthetic import galaxy_like


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="?")
    ap.add_argument("--target", default="velocity")
    ap.add_argument("--methods", default="moss_h,moss_m,topk")
    ap.add_argument("--json", help="write the full report here")
    ap.add_argument("--time-limit", type=float, default=None, help="seconds per epsilon for the exact solver")
    args = ap.parse_args(argv)
    if args.csv:
        data = load_dataset(args.csv, args.target)
    else:
        X, y, names = galaxy_like()
        data = Dataset(X, y, tuple(names))
        print("no CSV given: using the synthetic galaxy_like stand-in", flush=True)
    cfg = ExperimentConfig(folds=10, k=15, gamma=1e-3, methods=tuple(args.methods.split(",")), seed=0,
                           time_limit=args.time_limit)
    t = time.perf_counter()
    try:
        rep = run_cv(data, cfg)
    except SolverError as e:
        print(f"exact solver stopped after {time.perf_counter() - t:.1f}s: {json.dumps(e.to_dict())}")
        return 2
    print(f"{'method':8s} {'R2':>8s} {'SE':>8s} {'DSC':>8s}")
    for name, res in rep.methods.items():
        print(f"{name:8s} {res.r2_mean:8.4f} {res.r2_se:8.4f} {res.stability:8.4f}")
    print(f"elapsed {time.perf_counter() - t:.1f}s")
    if {"moss_h", "moss_m", "topk"} <= rep.methods.keys():
        h, mid, top = (rep.methods[m] for m in ("moss_h", "moss_m", "topk"))
        print("moss_h R2 in [0.85, 0.97] and DSC >= 0.40:", 0.85 <= h.r2_mean <= 0.97 and h.stability >= 0.40)
        print("top-k DSC >= moss_m DSC:", top.stability >= mid.stability)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rep.to_dict(timing=True), fh, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
