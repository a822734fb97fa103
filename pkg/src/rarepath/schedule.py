"""Variance-preserving noise schedule and the deterministic denoising update."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Signal and noise coefficients indexed by ``t = 0..steps``.

    ``t = 0`` is clean data and ``t = steps`` is (numerically) pure noise.
    """

    steps: int
    a: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        if self.steps < 1 or a.shape != (self.steps + 1,) or sigma.shape != a.shape:
            raise ValueError("coefficient arrays must have length steps + 1")
        if np.any(np.diff(a) > 0) or np.any(np.diff(sigma) < 0):
            raise ValueError("a must be nonincreasing and sigma nondecreasing in t")
        if a[0] < 1 - 1e-6 or sigma[0] > 1e-3 or a[-1] > 1e-3 or sigma[-1] < 1 - 1e-6:
            raise ValueError("schedule endpoints must reach clean data and pure noise")
        if np.max(np.abs(a * a + sigma * sigma - 1.0)) > 1e-9:
            raise ValueError("schedule is not variance preserving")
        a.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma", sigma)

    @property
    def T(self) -> int:
        return self.steps

    def coeffs(self, t: int) -> tuple[float, float]:
        return float(self.a[t]), float(self.sigma[t])

    def grid(self) -> "TimeGrid":
        return TimeGrid(tuple(range(self.steps, 0, -1)))


@dataclass(frozen=True)
class TimeGrid:
    """Noise indices visited while sampling, ``T, T-1, ..., 1``.

    Iterating yields ``(loop_index, t)`` pairs; parity is taken on the loop index.
    """

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = self.indices
        if not idx or any(b != a - 1 for a, b in zip(idx, idx[1:])) or idx[-1] != 1:
            raise ValueError("time grid must descend by one from T to 1")

    def __iter__(self):
        return iter(enumerate(self.indices))

    def __len__(self) -> int:
        return len(self.indices)


def make_vp_schedule(steps: int) -> NoiseSchedule:
    """Cosine schedule ``a_t = cos(t/T * pi/2)`` floored at 1e-4."""
    if steps < 2:
        raise ValueError(f"need at least 2 steps, got {steps}")
    t = np.arange(steps + 1, dtype=float)
    a = np.clip(np.cos(t / steps * (math.pi / 2)), 1e-4, 1.0)
    a[0] = 1.0
    sigma = np.sqrt(1.0 - a * a)
    return NoiseSchedule(steps, a, sigma)


def score_to_eps(s, sigma_t: float) -> np.ndarray:
    if sigma_t < 0:
        raise ValueError("sigma_t must be nonnegative")
    return -sigma_t * np.asarray(s, dtype=float)


def eps_to_score(eps, sigma_t: float) -> np.ndarray:
    if not sigma_t > 0:
        raise ValueError("cannot recover a score from eps at sigma_t = 0")
    return -np.asarray(eps, dtype=float) / sigma_t


def denoise_update(x, eps, schedule: NoiseSchedule, t_from: int, t_to: int,
                   allow_identity: bool = False) -> np.ndarray:
    """Move ``x`` from noise level ``t_from`` to ``t_to`` along the predicted noise ``eps``.

    The clean estimate ``x0 = (x - sigma_from * eps) / a_from`` is re-noised with
    the same ``eps`` at the target level.  The map is affine in ``eps``.
    """
    if t_to == t_from and allow_identity:
        return np.array(x, dtype=float)
    if not 0 <= t_to < t_from <= schedule.steps:
        raise ValueError(f"need 0 <= t_to < t_from <= {schedule.steps}, got {t_from} -> {t_to}")
    a_from, s_from = schedule.coeffs(t_from)
    if a_from <= 0:
        raise ValueError("signal coefficient at t_from is zero")
    a_to, s_to = schedule.coeffs(t_to)
    x = np.asarray(x, dtype=float)
    eps = np.asarray(eps, dtype=float)
    x0 = (x - s_from * eps) / a_from
    return a_to * x0 + s_to * eps
