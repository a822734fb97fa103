"""Baseline, fixed-schedule alternation and adaptive staged samplers.

All samplers run a batch of independent trajectories at once.  Each
trajectory draws its starting noise from its own generator, derived from
``(seed, trajectory index)``, so a trajectory's path never depends on the
batch size.  Stage pointers are tracked per trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .concepts import Concept
from .schedule import NoiseSchedule, denoise_update, eps_to_score
from .score_model import ScoreModel

NONE, R2F, RAP = "none", "r2f", "rap"
LITERAL_RARE, STAGE_ONE = "literal-rare", "stage-one"

SINGLE, PAIR_FIRST, PAIR_SECOND = 0, 1, 2
PAIR_ROLES = ("single", "pair-first", "pair-second")


class ConfigError(ValueError):
    """Raised for invalid sampler or run configuration."""


@dataclass(frozen=True)
class StageList:
    """Prompt stages ``c_1..c_n`` ordered by nonincreasing prior; the last is the rare target."""

    stages: tuple[Concept, ...]

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("a stage list needs at least one concept")
        for a, b in zip(stages, stages[1:]):
            if a.prior < b.prior:
                raise ValueError(f"stage priors must be nonincreasing ({a.id} < {b.id})")
        if len({c.dim for c in stages}) != 1:
            raise ValueError("stages must share a dimension")
        object.__setattr__(self, "stages", stages)

    def __len__(self) -> int:
        return len(self.stages)

    def __getitem__(self, k: int) -> Concept:
        return self.stages[k]

    def __iter__(self):
        return iter(self.stages)

    @property
    def rare(self) -> Concept:
        return self.stages[-1]

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.stages]


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 25
    delta_star: float = 0.08
    alpha: float = 0.5
    base_steps: int = 3
    base_prompt_mode: str = LITERAL_RARE
    guidance_w: float = 1.0
    alternation: str = NONE
    seed: int = 0
    trajectories: int = 1
    delta_on_guided: bool = True
    delta_space: str = "score"

    def __post_init__(self):
        if self.steps < 2:
            raise ConfigError("steps must be at least 2")
        if not self.delta_star > 0:
            raise ConfigError("delta_star must be positive")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not 0 <= self.base_steps < self.steps:
            raise ConfigError("base_steps must satisfy 0 <= base_steps < steps")
        if self.base_prompt_mode not in (LITERAL_RARE, STAGE_ONE):
            raise ConfigError(f"unknown base_prompt_mode {self.base_prompt_mode!r}")
        if self.guidance_w < 0:
            raise ConfigError("guidance_w must be nonnegative")
        if self.alternation not in (NONE, R2F, RAP):
            raise ConfigError(f"unknown alternation {self.alternation!r}")
        if self.trajectories < 1:
            raise ConfigError("trajectories must be at least 1")
        if self.delta_space not in ("score", "eps"):
            raise ConfigError(f"unknown delta_space {self.delta_space!r}")

    @property
    def evals_per_call(self) -> int:
        return 1 if self.guidance_w == 1 else 2


@dataclass(frozen=True)
class R2FSchedule:
    """Steps spent on each frequent stage ``c_1..c_{n-1}`` before advancing."""

    stage_steps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "stage_steps", tuple(int(v) for v in self.stage_steps))
        if any(v < 1 for v in self.stage_steps):
            raise ConfigError("every R2F stage needs at least one step")

    @classmethod
    def even_split(cls, n_stages: int, steps: int, fraction: float = 0.5) -> "R2FSchedule":
        """Spread ``fraction * steps`` evenly over the ``n_stages - 1`` frequent stages."""
        if n_stages <= 1:
            return cls(())
        per = max(1, int(steps * fraction) // (n_stages - 1))
        return cls((per,) * (n_stages - 1))

    def stage_at(self, loop_index: int) -> int:
        """0-based scheduled stage at a loop index."""
        edge = 0
        for k, v in enumerate(self.stage_steps):
            edge += v
            if loop_index < edge:
                return k
        return len(self.stage_steps)


def matching_score(s_k, s_k1) -> float | np.ndarray:
    """Relative score gap ``|s_k - s_{k+1}| / |s_k|`` (row-wise for batches)."""
    s_k = np.asarray(s_k, dtype=float)
    s_k1 = np.asarray(s_k1, dtype=float)
    if s_k.shape != s_k1.shape:
        raise ValueError(f"score shapes differ: {s_k.shape} vs {s_k1.shape}")
    num = np.sqrt(((s_k - s_k1) ** 2).sum(axis=-1))
    den = np.sqrt((s_k * s_k).sum(axis=-1))
    out = np.where((den <= 1e-12) & (num <= 1e-12), 0.0, num / np.maximum(den, 1e-12))
    return float(out) if out.ndim == 0 else out


def should_switch(delta_t, delta_star: float):
    return np.asarray(delta_t) <= delta_star if np.ndim(delta_t) else bool(delta_t <= delta_star)


def initial_noise(seed: int, count: int, dim: int) -> np.ndarray:
    """Standard-normal starting states, one independent stream per trajectory."""
    root = np.random.SeedSequence(seed)
    out = np.empty((count, dim))
    for j, child in enumerate(root.spawn(count)):
        out[j] = np.random.default_rng(child).standard_normal(dim)
    return out


@dataclass
class Trajectory:
    """One trajectory's per-step records and totals."""

    records: list[dict]
    eval_count: int
    switch_steps: list[int]
    final: np.ndarray


@dataclass
class TrajectoryBatch:
    """Per-step arrays for a batch of trajectories.

    ``x[i]`` is the state entering loop step ``i`` (noise level ``t[i]``).
    ``stage`` is the 1-based stage active for that step; ``delta`` is NaN where
    no matching score was computed and otherwise refers to the stage pair in
    force before any switch at that step.
    """

    prompt_ids: list[str]
    t: np.ndarray
    x: np.ndarray
    stage: np.ndarray
    prompt: np.ndarray
    delta: np.ndarray
    switch: np.ndarray
    role: np.ndarray
    eval_count: np.ndarray
    samples: np.ndarray
    base_steps: int = 0

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __getitem__(self, j: int) -> Trajectory:
        records = []
        for i in range(len(self.t)):
            d = self.delta[i, j]
            records.append({
                "loop_index": i,
                "t": int(self.t[i]),
                "x": self.x[i, j].tolist(),
                "stage": int(self.stage[i, j]),
                "prompt": self.prompt_ids[self.prompt[i, j]],
                "delta_t": None if np.isnan(d) else float(d),
                "switch": bool(self.switch[i, j]),
                "pair_role": PAIR_ROLES[self.role[i, j]],
            })
        return Trajectory(records, int(self.eval_count[j]), self.switch_steps(j),
                          self.samples[j].copy())

    def switch_steps(self, j: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.switch[:, j])]

    def delta_series(self, j: int) -> dict[int, list[tuple[int, float]]]:
        """Matching scores of trajectory ``j`` keyed by the stage they were measured on."""
        out: dict[int, list[tuple[int, float]]] = {}
        for i in np.flatnonzero(~np.isnan(self.delta[:, j])):
            k = int(self.stage[i, j] - self.switch[i, j])
            out.setdefault(k, []).append((int(i), float(self.delta[i, j])))
        return out


class _Recorder:
    def __init__(self, steps: int, n: int, dim: int, schedule: NoiseSchedule, prompt_ids):
        self.batch = TrajectoryBatch(
            prompt_ids=list(prompt_ids),
            t=np.arange(schedule.steps, schedule.steps - steps, -1),
            x=np.zeros((steps, n, dim)),
            stage=np.ones((steps, n), dtype=int),
            prompt=np.zeros((steps, n), dtype=int),
            delta=np.full((steps, n), np.nan),
            switch=np.zeros((steps, n), dtype=bool),
            role=np.full((steps, n), SINGLE, dtype=int),
            eval_count=np.zeros(n, dtype=int),
            samples=np.zeros((n, dim)),
        )

    def step(self, i, idx, x, stage, prompt, role=SINGLE):
        b = self.batch
        b.x[i, idx] = x
        b.stage[i, idx] = stage
        b.prompt[i, idx] = prompt
        b.role[i, idx] = role


def _check(cfg: SamplerConfig, schedule: NoiseSchedule, mode: str):
    if cfg.alternation != mode:
        raise ConfigError(f"sampler expects alternation={mode!r}, config has {cfg.alternation!r}")
    if schedule.steps != cfg.steps:
        raise ConfigError(f"schedule has {schedule.steps} steps but config asks for {cfg.steps}")


def _eval(model: ScoreModel, x, t, concept_id, cfg, rec, idx):
    eps = model.evaluate(x, t, concept_id, cfg.guidance_w)
    rec.batch.eval_count[idx] += cfg.evals_per_call
    return eps


def first_order_sample(model: ScoreModel, concept: Concept, cfg: SamplerConfig,
                       schedule: NoiseSchedule):
    """Single-prompt deterministic sampling, one model call per step."""
    _check(cfg, schedule, NONE)
    n = cfg.trajectories
    x = initial_noise(cfg.seed, n, concept.dim)
    rec = _Recorder(cfg.steps, n, concept.dim, schedule, [concept.id])
    idx = np.arange(n)
    for i, t in schedule.grid():
        rec.step(i, idx, x, 1, 0)
        eps = _eval(model, x, t, concept.id, cfg, rec, idx)
        x = denoise_update(x, eps, schedule, t, t - 1)
    rec.batch.samples[:] = x
    return x, rec.batch


def r2f_sample(model: ScoreModel, stages: StageList, sched_v: R2FSchedule,
               cfg: SamplerConfig, schedule: NoiseSchedule):
    """Fixed-schedule stage switching with rare-prompt alternation on odd loop steps."""
    _check(cfg, schedule, R2F)
    n_stages = len(stages)
    if len(sched_v.stage_steps) != n_stages - 1:
        raise ConfigError(f"R2F schedule needs {n_stages - 1} stage lengths, got {len(sched_v.stage_steps)}")
    if sum(sched_v.stage_steps) > cfg.steps:
        raise ConfigError("R2F stage steps exceed the step budget")
    n = cfg.trajectories
    x = initial_noise(cfg.seed, n, stages.rare.dim)
    rec = _Recorder(cfg.steps, n, stages.rare.dim, schedule, stages.ids)
    idx = np.arange(n)
    for i, t in schedule.grid():
        k = sched_v.stage_at(i)
        p = k if i % 2 == 0 else n_stages - 1
        rec.step(i, idx, x, k + 1, p)
        eps = _eval(model, x, t, stages[p].id, cfg, rec, idx)
        x = denoise_update(x, eps, schedule, t, t - 1)
    rec.batch.samples[:] = x
    return x, rec.batch


def second_order_pair_step(model: ScoreModel, x_pair_start, stage: Concept, rare: Concept,
                           alpha: float, schedule: NoiseSchedule, t: int, cfg: SamplerConfig):
    """Predictor-corrector step from ``x_{t-1}`` to ``x_{t-2}``.

    The predictor follows ``stage``; the corrector re-applies the update from
    ``x_{t-1}`` with the stage prediction blended against the rare prediction
    at the predicted point, weight ``1/(2*alpha)`` on the rare side.
    Returns the corrected point and the number of evaluations per point.
    """
    if t < 2:
        raise IndexError(f"pair step needs t >= 2, got {t}")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    w = cfg.guidance_w
    eps_f = model.evaluate(x_pair_start, t - 1, stage.id, w)
    x_pred = denoise_update(x_pair_start, eps_f, schedule, t - 1, t - 2)
    eps_r = model.evaluate(x_pred, t - 2, rare.id, w)
    c = 1.0 / (2.0 * alpha)
    blended = (1.0 - c) * eps_f + c * eps_r
    return denoise_update(x_pair_start, blended, schedule, t - 1, t - 2), 2 * cfg.evals_per_call


def _delta(eps_a, eps_b, sigma_t, cfg):
    if cfg.delta_space == "eps":
        return matching_score(eps_a, eps_b)
    return matching_score(eps_to_score(eps_a, sigma_t), eps_to_score(eps_b, sigma_t))


def rap_sample(model: ScoreModel, stages: StageList, cfg: SamplerConfig, schedule: NoiseSchedule):
    """Adaptive staged sampling with second-order pair steps.

    After ``base_steps`` plain steps, trajectories that have not reached the
    rare stage meet a pair boundary every two loop steps.  There the matching
    score between the active stage and the next one decides a (single) stage
    advance; the loop step then runs a first-order update with the active
    stage and the following step a predictor-corrector pair step.  Once the
    rare stage is active every step is a plain rare-prompt update, and a lone
    step left at the end also uses the rare prompt.
    """
    _check(cfg, schedule, RAP)
    n_stages = len(stages)
    last = n_stages - 1
    rare = stages.rare
    dim = rare.dim
    n = cfg.trajectories
    x = initial_noise(cfg.seed, n, dim)
    k = np.zeros(n, dtype=int)
    rec = _Recorder(cfg.steps, n, dim, schedule, stages.ids)
    T = schedule.steps
    everyone = np.arange(n)

    base = last if cfg.base_prompt_mode == LITERAL_RARE else 0
    for i in range(cfg.base_steps):
        t = T - i
        rec.step(i, everyone, x, 1, base)
        eps = _eval(model, x, t, stages[base].id, cfg, rec, everyone)
        x = denoise_update(x, eps, schedule, t, t - 1)

    def rare_step(i, idx, eps=None):
        t = T - i
        rec.step(i, idx, x[idx], k[idx] + 1, last)
        if eps is None:
            eps = _eval(model, x[idx], t, rare.id, cfg, rec, idx)
        x[idx] = denoise_update(x[idx], eps, schedule, t, t - 1)

    i = cfg.base_steps
    while i < cfg.steps:
        t = T - i
        done = np.flatnonzero(k == last)
        pending = np.flatnonzero(k < last)
        if len(done):
            rare_step(i, done)
            if i + 1 < cfg.steps:
                rare_step(i + 1, done)
        if len(pending) and i + 1 == cfg.steps:
            rare_step(i, pending)
        elif len(pending):
            _boundary(model, stages, cfg, schedule, rec, x, k, pending, i, rare_step)
        i += 2
    rec.batch.samples[:] = x
    rec.batch.base_steps = cfg.base_steps
    return x.copy(), rec.batch


def _boundary(model, stages, cfg, schedule, rec, x, k, pending, i, rare_step):
    """Matching-score check plus the two loop steps that follow it."""
    T = schedule.steps
    t = T - i
    last = len(stages) - 1
    rare = stages.rare
    sigma_t = schedule.coeffs(t)[1]
    b = rec.batch
    for kk in np.unique(k[pending]):
        idx = pending[k[pending] == kk]
        xs = x[idx]
        eps_k, cond_k = model.evaluate(xs, t, stages[kk].id, cfg.guidance_w, return_conditional=True)
        eps_n, cond_n = model.evaluate(xs, t, stages[kk + 1].id, cfg.guidance_w, return_conditional=True)
        b.eval_count[idx] += 2 * cfg.evals_per_call
        if cfg.delta_on_guided:
            delta = _delta(eps_k, eps_n, sigma_t, cfg)
        else:
            delta = _delta(cond_k, cond_n, sigma_t, cfg)
        b.delta[i, idx] = delta
        go = should_switch(delta, cfg.delta_star)
        b.switch[i, idx] = go
        k[idx[go]] += 1
        eps_now = np.where(go[:, None], eps_n, eps_k)

        reached = go & (kk + 1 == last)
        if reached.any():
            rare_step(i, idx[reached], eps_now[reached])
            if i + 1 < cfg.steps:
                rare_step(i + 1, idx[reached])
        for moved in (False, True):
            sel = ~reached & (go == moved)
            if not sel.any():
                continue
            sidx = idx[sel]
            stage = stages[kk + moved]
            rec.step(i, sidx, xs[sel], kk + moved + 1, kk + moved, PAIR_FIRST)
            x1 = denoise_update(xs[sel], eps_now[sel], schedule, t, t - 1)
            rec.step(i + 1, sidx, x1, kk + moved + 1, last, PAIR_SECOND)
            x[sidx], cost = second_order_pair_step(model, x1, stage, rare, cfg.alpha, schedule, t, cfg)
            b.eval_count[sidx] += cost
