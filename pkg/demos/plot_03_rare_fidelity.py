"""
Rare fidelity under a corrupted rare score
==========================================

The offset-narrow scenario corrupts the rare concept's score where that
concept has little density.  We sample with the rare prompt only, with the
fixed R2F schedule and with adaptive switching, and count samples inside the
rare concept's 95% ellipsoid.
"""

import numpy as np

from rarepath.harness.calibrate import calibrate
from rarepath.harness.config import resolve
from rarepath.harness.runner import hit_rate, run

cfg = resolve({"scenario": {"name": "offset-narrow"}})

###############################################################################
# The corruption amplitude in the scenario file came from this sweep: the
# smallest value that pushes direct sampling below 0.6.

kappa, clean, table = calibrate(cfg, seeds=range(2), trajectories=300)
print(f"clean hit rate {clean:.3f}; chosen amplitude {kappa}")
print("  ".join(f"{k}:{h:.2f}" for k, h in table))

###############################################################################
# Three methods, five seeds.

for seed in range(5):
    h = {m: hit_rate(cfg, run(cfg, alternation=m, seed=seed).samples) for m in ("none", "r2f", "rap")}
    print(f"seed {seed}: direct {h['none']:.3f}  r2f {h['r2f']:.3f}  rap {h['rap']:.3f}")

###############################################################################
# The scenario starts the adaptive sampler on the anchor prompt.  Starting on
# the rare prompt instead exposes the corrupted score at the noisiest level,
# where an error is amplified by a_{T-1}/a_T.

lit = [hit_rate(cfg, run(cfg, alternation="rap", base_prompt_mode="literal-rare", seed=s).samples)
       for s in range(5)]
print("rap with rare-prompt base phase:", np.round(lit, 3))
