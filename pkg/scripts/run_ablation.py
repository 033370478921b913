"""Target test accuracy per ablation mode on the reference sparse-target pairs.

    python3 scripts/run_ablation.py [--modes full,no-dd,no-ap] [--heterophilic]
"""

import argparse

from pota.evalharness import ABLATION_MODES
from pota.experiments import SEEDS, heterophilic_homophily, mode_accuracies

p = argparse.ArgumentParser()
p.add_argument("--modes", default=",".join(ABLATION_MODES))
p.add_argument("--heterophilic", action="store_true", help="use the low-homophily regime")
args = p.parse_args()

modes = args.modes.split(",")
if args.heterophilic:
    print(f"target homophily {heterophilic_homophily():.3f}")
acc = mode_accuracies(modes, heterophilic=args.heterophilic)
print("mode".ljust(14) + "".join(f"seed {s}".rjust(10) for s in SEEDS) + "mean".rjust(10))
for m in modes:
    vals = [acc[m][s] for s in SEEDS]
    print(m.ljust(14) + "".join(f"{v:10.5f}" for v in vals) + f"{sum(vals) / len(vals):10.5f}")
