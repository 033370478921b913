"""Discriminator accuracy on specific vs shared latents after training at shift 0.5."""

import numpy as np

from pota.experiments import SEEDS, disentanglement_proxy

accs = disentanglement_proxy()
for seed, a in zip(SEEDS, accs):
    print(f"seed {seed}: specific {a['specific']:.3f} shared {a['shared']:.3f}")
spe = np.mean([a["specific"] for a in accs])
com = np.mean([a["shared"] for a in accs])
print(f"mean: specific {spe:.3f} shared {com:.3f} gap {100 * (spe - com):.1f}pp")
