"""Median epoch time against edge count on square grids.

    python3 scripts/run_scaling.py [--sizes 32,64,128,256] [--hidden 64] [--out scaling.csv]
"""

import argparse

from pota.classifier import TrainConfig
from pota.evalharness import scaling_factor_per_doubling, scaling_probe, write_scaling_csv

p = argparse.ArgumentParser()
p.add_argument("--sizes", default="32,64,128")
p.add_argument("--hidden", type=int, default=64)
p.add_argument("--epochs", type=int, default=5)
p.add_argument("--out")
args = p.parse_args()

rows = scaling_probe([int(s) for s in args.sizes.split(",")], TrainConfig(hidden=args.hidden), args.epochs)
for w, h, e, t in rows:
    print(f"{w}x{h}: {e:6d} edges  {1e3 * t:8.2f} ms/epoch")
print(f"factor per edge doubling: {scaling_factor_per_doubling(rows):.3f}")
if args.out:
    write_scaling_csv(rows, args.out)
