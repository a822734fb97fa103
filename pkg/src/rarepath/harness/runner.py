"""Run one configured sampling job and score its output."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .. import metrics
from ..sampler import NONE, R2F, RAP, TrajectoryBatch, first_order_sample, r2f_sample, rap_sample
from ..schedule import make_vp_schedule
from ..score_model import ScoreModel
from .config import RunConfig


@dataclass
class RunResult:
    samples: np.ndarray
    batch: TrajectoryBatch
    model: ScoreModel


def run(cfg: RunConfig, **sampler_changes) -> RunResult:
    """Sample with ``cfg`` (optionally overriding SamplerConfig fields)."""
    sc = dataclasses.replace(cfg.sampler, **sampler_changes) if sampler_changes else cfg.sampler
    schedule = make_vp_schedule(sc.steps)
    model = ScoreModel(cfg.scenario.library, schedule, cfg.corruption)
    stages = cfg.scenario.stages(cfg.stage_ids)
    if sc.alternation == NONE:
        x, batch = first_order_sample(model, stages.rare, sc, schedule)
    elif sc.alternation == R2F:
        x, batch = r2f_sample(model, stages, cfg.r2f_schedule(), sc, schedule)
    elif sc.alternation == RAP:
        x, batch = rap_sample(model, stages, sc, schedule)
    else:  # pragma: no cover - SamplerConfig validates this
        raise AssertionError(sc.alternation)
    return RunResult(x, batch, model)


def target_component(cfg: RunConfig):
    """Highest-weight component of the rare concept (first one on ties)."""
    dist = cfg.scenario.library[cfg.stage_ids[-1]].distribution
    return dist.components[int(np.argmax(dist.weights))]


def hit_rate(cfg: RunConfig, samples) -> float:
    return metrics.concept_hit_rate(samples, target_component(cfg))


def score_samples(cfg: RunConfig, res: RunResult, seed: int) -> list[tuple[str, float]]:
    """Named metrics of a finished run, in a fixed order."""
    rare = cfg.scenario.library[cfg.stage_ids[-1]]
    exp = cfg.experiment
    ref = rare.distribution.sample(exp["reference_samples"], np.random.default_rng([seed, 1]))
    sw = metrics.sliced_wasserstein(res.samples, ref, exp["sw_projections"], np.random.default_rng([seed, 2]))
    stages = cfg.scenario.stages(cfg.stage_ids)
    out = [
        ("hit_rate", hit_rate(cfg, res.samples)),
        ("nll", metrics.nll(rare.distribution, res.samples)),
        ("sw_distance", sw),
        ("eval_count", int(res.batch.eval_count.sum())),
        ("evals_per_trajectory", float(res.batch.eval_count.mean())),
    ]
    for c, share in zip(stages, metrics.mode_attribution(res.samples, stages)):
        out.append((f"attribution:{c.id}", float(share)))
    return out


def switch_offsets(batch: TrajectoryBatch) -> np.ndarray:
    """Per-trajectory last switch step minus the base phase length (-1 if it never switched)."""
    out = np.full(len(batch), -1, dtype=int)
    for j in range(len(batch)):
        steps = batch.switch_steps(j)
        if steps:
            out[j] = steps[-1] - batch.base_steps
    return out
