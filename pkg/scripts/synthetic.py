"""Synthetic stand-ins for the benchmark data used by the experiment scripts.

``galaxy_like`` mimics the layout of the visualizing_galaxy table (323 rows:
east-west and north-south offsets, slit angle, radial position, velocity)
with a rotating-disc velocity field. It is a smoke-test substitute only;
its numbers are not comparable with results on the real data.
"""

from __future__ import annotations

import csv
import sys

import numpy as np


def galaxy_like(n: int = 323, seed: int = 0):
    rng = np.random.default_rng(seed)
    angles = np.array([12.5, 43.0, 63.5, 92.5, 102.5, 111.0, 133.0])
    angle = rng.choice(angles, size=n)
    radial = rng.uniform(-55.0, 55.0, size=n)
    theta = np.deg2rad(angle)
    ew = radial * np.sin(theta)
    ns = radial * np.cos(theta)
    # flat-topped rotation curve projected on the slit, major axis at 100 degrees
    v_rot = 220.0 * np.tanh(np.abs(radial) / 12.0) * np.sign(radial)
    velocity = 1600.0 + v_rot * np.cos(theta - np.deg2rad(100.0)) + rng.normal(0.0, 18.0, size=n)
    X = np.column_stack([ew, ns, angle, radial])
    return X, velocity, ["east.west", "north.south", "angle", "radial.position"]


def write_csv(path, X, y, names, target="target"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [target])
        for row, t in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(t))])


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "galaxy_like.csv"
    X, y, names = galaxy_like()
    write_csv(out, X, y, names, target="velocity")
    print(f"wrote {out}")
