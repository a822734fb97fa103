"""Harness commands.  Each returns a process exit code and writes into ``cfg.out_dir``."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from .. import metrics
from ..sampler import NONE, R2F, RAP, ConfigError
from . import io, svg, verify
from .config import ABLATE_GRIDS, RunConfig
from .runner import run, score_samples, switch_offsets

OK, FAILED, CONFIG = 0, 1, 2


def _say(msg: str):
    print(msg, flush=True)


def cmd_verify(out_dir, name_filter: str | None = None) -> int:
    suites = verify.select(name_filter)
    if not suites:
        _say(f"no suite matches {name_filter!r}")
        return CONFIG
    summary, cases = verify.run_suites(suites)
    header = json.dumps({"command": "verify", "filter": name_filter,
                         "suites": [s.name for s in suites]}, sort_keys=True, separators=(",", ":"))
    path = io.write_csv(Path(out_dir) / "verify_residuals.csv", header, ("case_id", "lambda", "t", "rel_err"),
                        ((c[0], c[1], c[2], c[3]) for c in cases))
    failed = []
    for name, ok, worst, n in summary:
        _say(f"{'PASS' if ok else 'FAIL'}  {name:<20} cases={n:<4d} worst residual={worst:.3e}")
        if not ok:
            failed.append(name)
    _say(f"residuals written to {path}")
    if failed:
        _say("failing suites: " + ", ".join(failed))
        return FAILED
    return OK


def _samples_rows(samples):
    for j, row in enumerate(samples):
        yield (j, *row)


def _trajectory_records(batch):
    for j in range(len(batch)):
        for rec in batch[j].records:
            yield {"traj": j, **rec}


def cmd_sample(cfg: RunConfig) -> int:
    seed = cfg.sampler.seed
    res = run(cfg)
    header = cfg.header(command="sample")
    out = cfg.out_dir
    dim = res.samples.shape[1]
    method = cfg.sampler.alternation
    mets = score_samples(cfg, res, seed)
    if "csv" in cfg.formats:
        io.write_csv(out / "samples.csv", header, ("traj", *[f"x{i}" for i in range(dim)]), _samples_rows(res.samples))
        io.write_csv(out / "metrics.csv", header, ("metric", "scenario", "method", "seed", "value"),
                     ((m, cfg.scenario.name, method, seed, v) for m, v in mets))
    if "jsonl" in cfg.formats:
        io.write_jsonl(out / "trajectory.jsonl", header, _trajectory_records(res.batch))
    for m, v in mets:
        _say(f"{m:<24} {io.fmt(v)}")
    return OK


def trace_rows(cfg: RunConfig) -> tuple[list[tuple], list[tuple]]:
    """Raw per-seed matching-score rows and per-series Kendall tau rows.

    Each seed runs a single trajectory; a series is the run of matching
    scores measured on one stage.
    """
    raw, taus = [], []
    for seed in cfg.seeds:
        res = run(cfg, seed=seed, trajectories=1)
        for k, pts in sorted(res.batch.delta_series(0).items()):
            for i, d in pts:
                raw.append((seed, i, k, d, cfg.sampler.delta_star))
            tau = metrics.kendall_tau([d for _, d in pts]) if len(pts) >= 2 else float("nan")
            taus.append((cfg.scenario.name, seed, k, len(pts), tau))
    return raw, taus


def cmd_trace(cfg: RunConfig) -> int:
    if cfg.sampler.alternation != RAP:
        raise ConfigError(f"trace needs sampler.alternation = 'rap', got {cfg.sampler.alternation!r}")
    raw, taus = trace_rows(cfg)
    ds = cfg.sampler.delta_star
    header = cfg.header(command="trace")
    stages = sorted({r[2] for r in raw})
    summary = []
    for k in stages:
        vals = [t[4] for t in taus if t[2] == k and not np.isnan(t[4])]
        summary.append(("kendall_tau", "", k, float(np.mean(vals)) if vals else float("nan"), ds))
    means = []
    for k in stages:
        by_step: dict[int, list[float]] = {}
        for _, i, kk, d, _ in raw:
            if kk == k:
                by_step.setdefault(i, []).append(d)
        for i in sorted(by_step):
            means.append((k, i, float(np.mean(by_step[i])), len(by_step[i]), ds))
    out = cfg.out_dir
    if "csv" in cfg.formats:
        io.write_csv(out / "trace.csv", header, ("seed", "loop_index", "stage", "delta_t", "delta_star"),
                     raw + summary)
        io.write_csv(out / "trace_tau.csv", header, ("scenario", "seed", "stage", "points", "kendall_tau"), taus)
        io.write_csv(out / "trace_mean.csv", header, ("stage", "loop_index", "mean_delta_t", "series", "delta_star"),
                     means)
    if "svg" in cfg.formats:
        write_trace_svgs(out, raw, ds, header)
    for row in summary:
        _say(f"stage {row[2]}: mean kendall tau {row[3]:.3f}")
    negative = [t for t in taus if t[4] < 0]
    defined = [t for t in taus if not np.isnan(t[4])]
    _say(f"series with tau < 0: {len(negative)} of {len(defined)} ({len(taus) - len(defined)} too short)")
    return OK


def write_trace_svgs(out: Path, raw, delta_star: float, comment: str) -> list[Path]:
    paths = []
    for k in sorted({r[2] for r in raw}):
        series: dict[str, list[tuple[float, float]]] = {}
        for seed, i, kk, d, _ in raw:
            if kk == k:
                series.setdefault(f"seed {seed}", []).append((float(i), float(d)))
        paths.append(svg.line_chart(out / f"trace_stage{k}.svg", series, delta_star,
                                    f"matching score, stage {k}", comment))
    return paths


def cmd_ablate(cfg: RunConfig) -> int:
    param = cfg.experiment["param"]
    if param is None:
        raise ConfigError("ablate needs experiment.param (delta_star or alpha)")
    if param not in ABLATE_GRIDS:
        raise ConfigError(f"experiment.param: unknown parameter {param!r}")
    values = cfg.experiment["values"] or ABLATE_GRIDS[param]
    rows = []
    for value in values:
        for seed in cfg.seeds:
            res = run(cfg, seed=seed, **{param: float(value)})
            mets = [(m, v) for m, v in score_samples(cfg, res, seed) if m == "hit_rate" or m.startswith("attribution:")]
            offs = switch_offsets(res.batch)
            mets.append(("switched_fraction", float(np.mean(offs >= 0))))
            mets.append(("max_switch_offset", int(offs.max())))
            for m, v in mets:
                rows.append((param, value, seed, m, v))
            hr = dict(mets)["hit_rate"]
            _say(f"{param}={io.fmt(float(value))} seed={seed} hit_rate={hr:.3f}")
    if "csv" in cfg.formats:
        io.write_csv(cfg.out_dir / "ablate.csv", cfg.header(command="ablate"),
                     ("param", "value", "seed", "metric", "result"), rows)
    return OK


METHODS = (NONE, R2F, RAP)


def bench_rows(cfg: RunConfig):
    """Evaluation counts per (scenario, method); wall times are returned apart since they vary run to run."""
    rows, timing = [], []
    for name in cfg.experiment["scenarios"]:
        sc_cfg = cfg if name == cfg.scenario.name else cfg.for_scenario(name)
        base = None
        for method in METHODS:
            t0 = time.perf_counter()
            res = run(sc_cfg, alternation=method)
            wall = time.perf_counter() - t0
            total = int(res.batch.eval_count.sum())
            per = float(res.batch.eval_count.mean())
            if base is None:
                base = per
            calls = total // sc_cfg.sampler.evals_per_call
            rows.append((name, method, sc_cfg.sampler.guidance_w, sc_cfg.sampler.steps, len(res.batch),
                         calls, total, per, per / base))
            timing.append((name, method, wall))
    return rows, timing


def cmd_bench(cfg: RunConfig) -> int:
    rows, timing = bench_rows(cfg)
    header = cfg.header(command="bench")
    if "csv" in cfg.formats:
        io.write_csv(cfg.out_dir / "bench.csv", header,
                     ("scenario", "method", "guidance_w", "steps", "trajectories", "model_calls", "eval_count",
                      "evals_per_trajectory", "eval_ratio"), rows)
    for r, tm in zip(rows, timing):
        _say(f"{r[0]:<14} {r[1]:<5} evals/traj={r[7]:7.2f} ratio={r[8]:.3f} wall={tm[2]:.3f}s")
    return OK


def cmd_plot(cfg: RunConfig) -> int:
    out = cfg.out_dir
    samples_path, trace_path = out / "samples.csv", out / "trace.csv"
    if not samples_path.exists() and not trace_path.exists():
        _say(f"no samples.csv or trace.csv in {out}")
        return FAILED
    header = cfg.header(command="plot")
    if samples_path.exists():
        _, rows = io.read_csv(samples_path)
        if not rows:
            _say(f"{samples_path} holds no samples; nothing plotted")
            return FAILED
        cols = sorted((c for c in rows[0] if c.startswith("x")), key=lambda c: int(c[1:]))
        pts = np.array([[float(r[c]) for c in cols] for r in rows])
        if pts.shape[1] > 2:
            pts = pts[:, :2]
        stages = cfg.scenario.stages(cfg.stage_ids)
        full = np.array([[float(r[c]) for c in cols] for r in rows])
        scores = np.stack([c.distribution.log_density(full) for c in stages], axis=1)
        labels = np.argmax(scores, axis=1)
        svg.scatter(out / "samples.svg", pts, labels, stages.ids, f"final samples, {cfg.scenario.name}", header)
        _say(f"wrote {out / 'samples.svg'}")
    if trace_path.exists():
        meta, rows = io.read_csv(trace_path)
        raw = [(int(r["seed"]), int(r["loop_index"]), int(r["stage"]), float(r["delta_t"]), float(r["delta_star"]))
               for r in rows if r["seed"] != "kendall_tau"]
        if not raw:
            _say(f"{trace_path} holds no matching scores; nothing plotted")
            return FAILED
        for p in write_trace_svgs(out, raw, raw[0][4], header):
            _say(f"wrote {p}")
    return OK


COMMANDS = {
    "sample": cmd_sample,
    "trace": cmd_trace,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
    "plot": cmd_plot,
}
