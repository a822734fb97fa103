"""Surrogate rare/frequent mixtures and score-substitution measurements.

All densities here are the noisy marginals at a schedule level ``t``; use
``t = 0`` of any schedule for the clean distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .concepts import Concept, GaussianMixture
from .metrics import GapStats
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class SurrogateMixture:
    """``lam * p_t(x | rare) + (1 - lam) * p_t(x | frequent)``."""

    rare: Concept
    frequent: Concept
    lam: float

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.rare.dim != self.frequent.dim:
            raise ValueError("rare and frequent concepts differ in dimension")

    def marginals(self, t: int, schedule: NoiseSchedule) -> tuple[GaussianMixture, GaussianMixture]:
        a, s = schedule.coeffs(t)
        return (self.rare.distribution.noisy_marginal(a, s),
                self.frequent.distribution.noisy_marginal(a, s))


def surrogate_log_density(sm: SurrogateMixture, x, t: int, schedule: NoiseSchedule):
    m_r, m_f = sm.marginals(t, schedule)
    if sm.lam == 1:
        return m_r.log_density(x)
    if sm.lam == 0:
        return m_f.log_density(x)
    terms = np.stack([math.log(sm.lam) + np.asarray(m_r.log_density(x)),
                      math.log1p(-sm.lam) + np.asarray(m_f.log_density(x))])
    out = logsumexp(terms, axis=0)
    return float(out) if out.ndim == 0 else out


def surrogate_score(sm: SurrogateMixture, x, t: int, schedule: NoiseSchedule):
    """Responsibility-weighted blend of the rare and frequent scores."""
    m_r, m_f = sm.marginals(t, schedule)
    if sm.lam == 1:
        return m_r.score(x)
    if sm.lam == 0:
        return m_f.score(x)
    lr = math.log(sm.lam) + np.asarray(m_r.log_density(x))
    lf = math.log1p(-sm.lam) + np.asarray(m_f.log_density(x))
    total = np.logaddexp(lr, lf)
    w_r = np.exp(lr - total)[..., None]
    w_f = np.exp(lf - total)[..., None]
    return w_r * m_r.score(x) + w_f * m_f.score(x)


def perturbation_field(c_r: Concept, c_f: Concept, x, t: int, schedule: NoiseSchedule):
    """Log-density gap ``log p_t(x | rare) - log p_t(x | frequent)``."""
    a, s = schedule.coeffs(t)
    if c_r is c_f:
        return np.zeros(np.shape(x)[:-1]) if np.ndim(x) > 1 else 0.0
    lr = c_r.distribution.noisy_marginal(a, s).log_density(x)
    lf = c_f.distribution.noisy_marginal(a, s).log_density(x)
    return lr - lf


def probe_points(c_f: Concept, t: int, schedule: NoiseSchedule, count: int = 1000,
                 seed: int = 0) -> np.ndarray:
    """Probe set drawn from the frequent concept's noisy marginal."""
    a, s = schedule.coeffs(t)
    return c_f.distribution.noisy_marginal(a, s).sample(count, np.random.default_rng(seed))


def substitution_gap(c_r: Concept, c_f: Concept, t: int, schedule: NoiseSchedule, probe) -> GapStats:
    """Absolute and relative gaps between rare and frequent scores over a probe set."""
    probe = np.atleast_2d(np.asarray(probe, dtype=float))
    if probe.shape[0] == 0:
        raise ValueError("probe set is empty")
    a, s = schedule.coeffs(t)
    s_r = c_r.distribution.noisy_marginal(a, s).score(probe)
    s_f = c_f.distribution.noisy_marginal(a, s).score(probe)
    gap = np.linalg.norm(s_r - s_f, axis=1)
    rel = gap / np.maximum(np.linalg.norm(s_f, axis=1), 1e-12)
    return GapStats(float(gap.mean()), float(gap.max()), float(rel.mean()), float(rel.max()),
                    probe.shape[0])
