"""Transfer gain of PoTA over target-only on the reference sparse-target regime.

    python3 scripts/run_gain_study.py [--source-density 0.10] [--seeds 0,1,2,3,4]
"""

import argparse

from pota.experiments import DENSE, SEEDS, gain_study

p = argparse.ArgumentParser()
p.add_argument("--source-density", type=float, default=DENSE)
p.add_argument("--seeds", default=",".join(map(str, SEEDS)))
args = p.parse_args()

study = gain_study(args.source_density, [int(s) for s in args.seeds.split(",")])
for r in study.runs:
    t, b = r.transfer, r.baseline
    print(f"seed {r.seed}: gain {r.gain:+.5f}  pota acc {t.accuracy:.5f} (tp {t.tp} fp {t.fp})  "
          f"target-only acc {b.accuracy:.5f} (tp {b.tp} fp {b.fp})")
print(f"mean gain {study.mean_gain:+.5f}; positive in {study.n_positive}/{len(study.runs)}; {study.seconds:.0f}s")
