"""Run configuration: strict TOML parsing and resolution against a scenario.

Layout::

    [scenario]
    name = "offset-narrow"      # built-in, or give stages + [[scenario.concept]]
    stages = ["rare"]           # optional override of the stage list

    [sampler]                   # SamplerConfig fields, plus r2f_stage_steps
    alternation = "rap"

    [corruption]                # CorruptionSpec fields, or enabled = false
    amplitude = 0.5

    [outputs]
    dir = "runs/demo"
    formats = ["csv", "jsonl", "svg"]

    [experiment]
    seeds = 5                   # consecutive seeds starting at sampler.seed
    param = "alpha"             # ablate only
    values = [0.5, 1, 10, 100]
    scenarios = ["offset-narrow", "three-stage", "disjoint"]

Any key not listed above raises ``ConfigError`` before any computation.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from ..sampler import ConfigError, R2FSchedule, SamplerConfig
from ..score_model import CorruptionSpec
from .scenarios import BUILTIN, Scenario, builtin_doc, scenario_from_dict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FORMATS = ("csv", "jsonl", "svg")
ABLATE_GRIDS = {
    "delta_star": [0.01, 0.04, 0.08, 0.15, 1.0],
    "alpha": [0.5, 1.0, 10.0, 100.0],
}

_SAMPLER_KEYS = {f.name for f in dataclasses.fields(SamplerConfig)} | {"r2f_stage_steps"}
_CORRUPTION_KEYS = {f.name for f in dataclasses.fields(CorruptionSpec)} | {"enabled"}
_SECTIONS = {
    "scenario": {"name", "stages", "concept"},
    "sampler": _SAMPLER_KEYS,
    "corruption": _CORRUPTION_KEYS,
    "outputs": {"dir", "formats"},
    "experiment": {"seeds", "param", "values", "scenarios", "reference_samples", "sw_projections"},
}
_EXPERIMENT_DEFAULTS = {
    "seeds": 1,
    "param": None,
    "values": None,
    "scenarios": list(BUILTIN),
    "reference_samples": 2000,
    "sw_projections": 50,
}


def _strict(doc: dict, allowed: set, where: str):
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {where}{key!r}")


_SAMPLER_TYPES = {f.name: type(f.default) for f in dataclasses.fields(SamplerConfig)}
_CORRUPTION_TYPES = {"amplitude": float, "density_floor": float, "bandwidth": float, "field_seed": int,
                     "targets": list, "enabled": bool}


def _typed(doc: dict, types: dict, where: str):
    for key, value in doc.items():
        want = types.get(key)
        if want is None:
            continue
        ok = isinstance(value, want) and not (want is int and isinstance(value, bool))
        if want is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if not ok:
            raise ConfigError(f"{where}{key} must be of type {want.__name__}, got {value!r}")


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration.

    ``raw`` is the parsed TOML; the other fields are resolved against the
    scenario's own defaults.
    """

    raw: dict
    scenario: Scenario
    stage_ids: tuple[str, ...]
    sampler: SamplerConfig
    r2f_stage_steps: tuple[int, ...] | None
    corruption: CorruptionSpec | None
    out_dir: Path
    formats: tuple[str, ...]
    experiment: dict

    @property
    def seeds(self) -> list[int]:
        return [self.sampler.seed + i for i in range(self.experiment["seeds"])]

    def r2f_schedule(self) -> R2FSchedule:
        if self.r2f_stage_steps is not None:
            return R2FSchedule(self.r2f_stage_steps)
        return R2FSchedule.even_split(len(self.stage_ids), self.sampler.steps)

    def with_sampler(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, sampler=dataclasses.replace(self.sampler, **changes))

    def for_scenario(self, name: str) -> "RunConfig":
        """Same run settings on another built-in scenario (its own defaults apply)."""
        raw = copy.deepcopy(self.raw)
        raw["scenario"] = {"name": name}
        cfg = resolve(raw, self.out_dir)
        return dataclasses.replace(cfg, sampler=dataclasses.replace(cfg.sampler, seed=self.sampler.seed))

    def resolved(self) -> dict:
        """Plain dict of every resolved setting, for artifact headers."""
        corr = None
        if self.corruption is not None:
            corr = dataclasses.asdict(self.corruption)
            corr["targets"] = sorted(corr["targets"])
        return {
            "scenario": self.scenario.name,
            "stages": list(self.stage_ids),
            "sampler": dataclasses.asdict(self.sampler),
            "r2f_stage_steps": list(self.r2f_schedule().stage_steps),
            "corruption": corr,
            "formats": list(self.formats),
            "experiment": self.experiment,
        }

    def header(self, **extra) -> str:
        doc = self.resolved()
        doc.update(extra)
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def parse_config(text: str) -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None
    _strict(doc, set(_SECTIONS), "")
    for section, allowed in _SECTIONS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        _strict(body, allowed, f"{section}.")
    _typed(doc.get("sampler", {}), _SAMPLER_TYPES, "sampler.")
    _typed(doc.get("corruption", {}), _CORRUPTION_TYPES, "corruption.")
    return doc


def resolve(doc: dict, out_dir=None, seed: int | None = None) -> RunConfig:
    sc = doc.get("scenario", {})
    if "concept" in sc:
        try:
            scenario = scenario_from_dict({"concept": sc["concept"], "stages": sc.get("stages"),
                                           "name": sc.get("name", "inline")})
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"scenario: {exc}") from None
    else:
        name = sc.get("name")
        if name is None:
            raise ConfigError("missing key 'scenario.name'")
        try:
            scenario = scenario_from_dict(builtin_doc(name), name)
        except KeyError as exc:
            raise ConfigError(f"scenario.name: {exc.args[0]}") from None
    stage_ids = tuple(sc.get("stages") or scenario.stage_ids)
    for s in stage_ids:
        if s not in scenario.library:
            raise ConfigError(f"scenario.stages: {s!r} is not a concept of {scenario.name!r}")
    try:
        scenario.stages(stage_ids)
    except ValueError as exc:
        raise ConfigError(f"scenario.stages: {exc}") from None

    fields = dict(scenario.sampler)
    fields.update(doc.get("sampler", {}))
    r2f = fields.pop("r2f_stage_steps", None)
    if seed is not None:
        fields["seed"] = seed
    try:
        sampler = SamplerConfig(**fields)
    except TypeError as exc:
        raise ConfigError(f"sampler: {exc}") from None

    corr_fields = dict(scenario.corruption or {})
    user_corr = dict(doc.get("corruption", {}))
    enabled = user_corr.pop("enabled", bool(corr_fields) or bool(user_corr))
    corr_fields.update(user_corr)
    corruption = None
    if enabled:
        try:
            corruption = CorruptionSpec(**corr_fields)
        except TypeError as exc:
            raise ConfigError(f"corruption: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"corruption: {exc}") from None
        missing = set(corruption.targets) - set(scenario.library)
        if missing:
            raise ConfigError(f"corruption.targets: unknown concept(s) {sorted(missing)}")

    outputs = doc.get("outputs", {})
    formats = tuple(outputs.get("formats", FORMATS))
    bad = set(formats) - set(FORMATS)
    if bad:
        raise ConfigError(f"outputs.formats: unsupported format(s) {sorted(bad)}")
    if out_dir is None:
        out_dir = outputs.get("dir", "rarepath-out")

    exp = dict(_EXPERIMENT_DEFAULTS)
    exp.update(doc.get("experiment", {}))
    if not isinstance(exp["seeds"], int) or exp["seeds"] < 1:
        raise ConfigError("experiment.seeds must be a positive integer")
    for s in exp["scenarios"]:
        if s not in BUILTIN:
            raise ConfigError(f"experiment.scenarios: unknown scenario {s!r}")
    if exp["param"] is not None and exp["param"] not in ABLATE_GRIDS:
        raise ConfigError(f"experiment.param: unknown parameter {exp['param']!r}")
    if exp["values"] is not None and len(exp["values"]) == 0:
        raise ConfigError("experiment.values must be nonempty")

    cfg = RunConfig(doc, scenario, stage_ids, sampler, tuple(r2f) if r2f is not None else None,
                    corruption, Path(out_dir), formats, exp)
    if sampler.alternation == "r2f":
        sched = cfg.r2f_schedule()
        if len(sched.stage_steps) != len(stage_ids) - 1:
            raise ConfigError("sampler.r2f_stage_steps needs one entry per frequent stage")
    return cfg


def load_config(path, out_dir=None, seed: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return resolve(parse_config(text), out_dir, seed)
