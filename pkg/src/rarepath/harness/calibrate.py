"""Corruption-amplitude calibration for the headline comparison.

Rule: take the smallest amplitude on ``GRID`` for which direct-rare sampling
(baseline method, corrupted model) has mean hit rate below 0.6 over the seeds,
provided the uncorrupted model still reaches at least 0.95.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .config import RunConfig
from .runner import hit_rate, run

GRID = (0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)
DIRECT_CEILING = 0.6
CLEAN_FLOOR = 0.95


def direct_hit_rate(cfg: RunConfig, amplitude: float | None, seeds, trajectories: int) -> float:
    """Mean baseline hit rate; ``amplitude=None`` disables corruption."""
    if amplitude is None:
        c = dataclasses.replace(cfg, corruption=None)
    else:
        c = dataclasses.replace(cfg, corruption=dataclasses.replace(cfg.corruption, amplitude=amplitude))
    rates = [hit_rate(c, run(c, alternation="none", seed=s, trajectories=trajectories).samples) for s in seeds]
    return float(np.mean(rates))


def calibrate(cfg: RunConfig, grid=GRID, seeds=range(5), trajectories: int = 500):
    """Returns ``(chosen amplitude or None, clean hit rate, [(amplitude, hit rate)])``."""
    if cfg.corruption is None:
        raise ValueError("calibration needs a corruption spec to scale")
    clean = direct_hit_rate(cfg, None, seeds, trajectories)
    table = []
    chosen = None
    for kappa in grid:
        hr = direct_hit_rate(cfg, kappa, seeds, trajectories)
        table.append((kappa, hr))
        if chosen is None and hr < DIRECT_CEILING and clean >= CLEAN_FLOOR:
            chosen = kappa
    return chosen, clean, table
