"""
Surrogate mixtures and score substitution
=========================================

A frequent concept can stand in for a rare one wherever the two noisy
marginals overlap.  Here we check the surrogate score against finite
differences, then watch the substitution gap grow with the distance
between the concepts.
"""

import numpy as np

from rarepath.concepts import Concept, GaussianMixture
from rarepath.harness.verify import richardson_grad
from rarepath.schedule import make_vp_schedule
from rarepath.surrogate import (SurrogateMixture, probe_points, substitution_gap,
                                surrogate_log_density, surrogate_score)

sched = make_vp_schedule(25)
freq = Concept("horned animal", GaussianMixture.single([0.0, 0.0], 1.0), 0.9)
rare = Concept("horned elephant", GaussianMixture.single([1.5, 0.5], 0.1), 0.1)

###############################################################################
# The surrogate score is a responsibility-weighted blend of the two scores.
# It should equal the gradient of the surrogate log density.

sm = SurrogateMixture(rare, freq, lam=0.3)
x = np.array([0.8, 0.2])
for t in (2, 10, 20):
    s = surrogate_score(sm, x, t, sched)
    fd = richardson_grad(lambda y: surrogate_log_density(sm, y, t, sched), x, 1e-3)
    print(f"t={t:2d}  score={s}  rel err={np.linalg.norm(s - fd) / np.linalg.norm(fd):.1e}")

###############################################################################
# Substitution gap: mean |s_rare - s_freq| over points drawn near the frequent
# concept.  With equal covariances it is a*|shift|/(a^2 v + sigma^2), so it grows
# with the shift and shrinks toward pure noise.

for t in (0, 12, 24):
    gaps = []
    for sep in (0.1, 1.0, 3.0):
        f = Concept("f", GaussianMixture.single([0.0, 0.0], 0.5), 0.9)
        r = Concept("r", GaussianMixture.single([sep, 0.0], 0.5), 0.1)
        gaps.append(substitution_gap(r, f, t, sched, probe_points(f, t, sched)).mean_abs)
    print(f"t={t:2d}  gap at separation 0.1 / 1 / 3: " + " / ".join(f"{g:.3f}" for g in gaps))
