"""
The predictor-corrector pair step
=================================

The pair step predicts with the active stage, then re-applies the update with
the stage prediction blended against the rare prediction at the predicted
point.  With alpha = 1 and a single concept it is a Heun step.
"""

from rarepath.harness.config import resolve
from rarepath.harness.runner import hit_rate, run
from rarepath.harness.verify import heun_vs_euler

###############################################################################
# Endpoint error against a dense reference integration of the same ODE.

for t in (6, 13, 20):
    heun, euler = heun_vs_euler(t)
    print(f"pair from level {t - 1} to {t - 2}: pair step {heun:.2e}  single step {euler:.2e}")

###############################################################################
# Large alpha keeps the frequent prediction and drops the rare one; alpha = 0.5
# keeps only the rare prediction in the corrector.

cfg = resolve({"scenario": {"name": "offset-narrow"}, "sampler": {"alternation": "rap"}})
for alpha in (0.5, 1.0, 10.0, 100.0):
    print(f"alpha {alpha:6.1f}: hit rate {hit_rate(cfg, run(cfg, alpha=alpha).samples):.3f}")
