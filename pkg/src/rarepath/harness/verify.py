"""Self-contained oracle-agreement and invariant suites.

Each suite yields cases ``(case_id, lam, t, residual, tol)``; a case passes
when ``residual <= tol`` and a suite passes when all of its cases do.  Library
functions are looked up through their modules at call time so that a patched
implementation is what gets verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .. import concepts, metrics, sampler, schedule as sched_mod, score_model, surrogate
from ..concepts import Concept, ConceptLibrary, GaussianComponent, GaussianMixture

Case = tuple[str, float | None, int | None, float, float]


@dataclass(frozen=True)
class Suite:
    name: str
    run: Callable[[], Iterator[Case]]
    doc: str


def random_mixture(rng: np.random.Generator, d: int, max_components: int = 3) -> GaussianMixture:
    k = int(rng.integers(1, max_components + 1))
    w = rng.dirichlet(np.ones(k))
    comps = []
    for i in range(k):
        A = rng.normal(0, 0.5, (d, d))
        comps.append(GaussianComponent(w[i], rng.uniform(-2, 2, d), A @ A.T + 0.2 * np.eye(d)))
    return GaussianMixture(comps)


def richardson_grad(f, x, h: float) -> np.ndarray:
    """Central differences at ``h`` and ``h/2`` combined to fourth order."""
    return (4 * metrics.finite_diff_grad(f, x, h / 2) - metrics.finite_diff_grad(f, x, h)) / 3


def _rel(err, ref) -> float:
    return float(np.linalg.norm(err) / max(float(np.linalg.norm(ref)), 1e-12))


def _theorem1_identity():
    rng = np.random.default_rng(101)
    sch = sched_mod.make_vp_schedule(25)
    for i in range(120):
        d = 1 + i % 3
        c_r = Concept("r", random_mixture(rng, d), 0.1)
        c_f = Concept("f", random_mixture(rng, d), 0.9)
        lam = float(rng.uniform(0.01, 0.99))
        t = int(rng.integers(0, 25))
        sm = surrogate.SurrogateMixture(c_r, c_f, lam)
        m_r, m_f = sm.marginals(t, sch)
        x = (m_r if rng.random() < lam else m_f).sample(1, rng)[0]
        s = surrogate.surrogate_score(sm, x, t, sch)
        fd = richardson_grad(lambda y: surrogate.surrogate_log_density(sm, y, t, sch), x, 1e-3)
        yield f"theorem1-identity/{i:04d}", lam, t, _rel(s - fd, fd), 1e-5


def _theorem1_endpoints():
    rng = np.random.default_rng(102)
    sch = sched_mod.make_vp_schedule(25)
    for i in range(30):
        d = 1 + i % 3
        c_r = Concept("r", random_mixture(rng, d), 0.1)
        c_f = Concept("f", random_mixture(rng, d), 0.9)
        t = int(rng.integers(0, 26))
        a, s = sch.coeffs(t)
        x = rng.normal(0, 2, (5, d))
        for lam, ref in ((1.0, c_r), (0.0, c_f)):
            sm = surrogate.SurrogateMixture(c_r, c_f, lam)
            m = ref.distribution.noisy_marginal(a, s)
            err = max(float(np.max(np.abs(surrogate.surrogate_score(sm, x, t, sch) - m.score(x)))),
                      float(np.max(np.abs(surrogate.surrogate_log_density(sm, x, t, sch) - m.log_density(x)))))
            yield f"theorem1-endpoints/{i:04d}-{int(lam)}", lam, t, err, 1e-12


def _matched_pair(sep: float, d: int = 2, var: float = 0.5):
    mean = np.zeros(d)
    shift = np.zeros(d)
    shift[0] = sep
    c_f = Concept("f", GaussianMixture.single(mean, var), 0.9)
    c_r = Concept("r", GaussianMixture.single(mean + shift, var), 0.1)
    return c_r, c_f


def _theorem2_direction():
    sch = sched_mod.make_vp_schedule(25)
    for t in (0, 5, 12, 20):
        gaps = []
        for sep in (0.1, 1.0, 3.0):
            c_r, c_f = _matched_pair(sep)
            probe = surrogate.probe_points(c_f, t, sch, 1000, seed=t)
            gaps.append(surrogate.substitution_gap(c_r, c_f, t, sch, probe).mean_abs)
        for j in range(2):
            # ratio below 1 means a strict increase
            yield f"theorem2-direction/t{t}-{j}", None, t, gaps[j] / gaps[j + 1], 1 - 1e-9


def _theorem2_dominance():
    rng = np.random.default_rng(103)
    sch = sched_mod.make_vp_schedule(25)
    n = 0
    for i in range(60):
        d = 1 + i % 3
        c_r = Concept("r", random_mixture(rng, d), 0.1)
        c_f = Concept("f", random_mixture(rng, d), 0.9)
        t = int(rng.integers(0, 25))
        lam = float(rng.uniform(0.05, 0.5))
        sm = surrogate.SurrogateMixture(c_r, c_f, lam)
        m_r, m_f = sm.marginals(t, sch)
        x = m_f.sample(200, rng)
        eta = surrogate.perturbation_field(c_r, c_f, x, t, sch)
        keep = eta <= math.log(1e-3)
        if not keep.any():
            continue
        xs = x[keep]
        s_f = m_f.score(xs)
        gap = np.linalg.norm(surrogate.surrogate_score(sm, xs, t, sch) - s_f, axis=1)
        bound = 1e-2 * (1 + np.linalg.norm(s_f, axis=1))
        worst = int(np.argmax(gap / bound))
        n += 1
        yield f"theorem2-dominance/{i:04d}", lam, t, float(gap[worst] / bound[worst]), 1.0
    if n == 0:
        yield "theorem2-dominance/none", None, None, math.inf, 1.0


def _concept_score():
    rng = np.random.default_rng(104)
    for i in range(60):
        d = 1 + i % 3
        m = random_mixture(rng, d)
        x = m.sample(1, rng)[0]
        fd = richardson_grad(lambda y: concepts.log_density(m, y), x, 1e-3)
        yield f"concept-score/{i:04d}", None, None, _rel(concepts.score(m, x) - fd, fd), 1e-5


def _noisy_marginal():
    rng = np.random.default_rng(105)
    sch = sched_mod.make_vp_schedule(25)
    for i, t in enumerate((3, 10, 18, 24)):
        d = 1 + i % 3
        m = random_mixture(rng, d)
        a, s = sch.coeffs(t)
        x0 = m.sample(40000, rng)
        xt = a * x0 + s * rng.standard_normal(x0.shape)
        mt = concepts.noisy_marginal(m, a, s)
        mean = (mt.weights[:, None] * mt.means).sum(axis=0)
        diff = mt.means - mean
        cov = (mt.weights[:, None, None] * (mt.covs + diff[:, :, None] * diff[:, None, :])).sum(axis=0)
        se = np.sqrt(np.diag(cov) / x0.shape[0])
        # mean error in standard errors; 5 is a generous two-sided bound
        yield f"noisy-marginal/{i:04d}-mean", None, t, float(np.max(np.abs(xt.mean(axis=0) - mean) / se)), 5.0
        emp = np.cov(xt.T).reshape(d, d)
        yield f"noisy-marginal/{i:04d}-cov", None, t, float(np.max(np.abs(emp - cov))), 0.05 * float(np.max(np.diag(cov)))


def _schedule():
    for steps in (2, 25, 200):
        sch = sched_mod.make_vp_schedule(steps)
        vp = float(np.max(np.abs(sch.a ** 2 + sch.sigma ** 2 - 1)))
        yield f"schedule/vp-{steps}", None, None, vp, 1e-12
        mono = float(max(np.max(np.diff(sch.a)), 0.0) + max(-np.min(np.diff(sch.sigma)), 0.0))
        yield f"schedule/monotone-{steps}", None, None, mono, 0.0
    sch = sched_mod.make_vp_schedule(25)
    rng = np.random.default_rng(106)
    x0, eps = rng.normal(size=(2, 50, 2))
    for t in (25, 13, 2):
        a, s = sch.coeffs(t)
        a2, s2 = sch.coeffs(t - 1)
        out = sched_mod.denoise_update(a * x0 + s * eps, eps, sch, t, t - 1)
        yield f"schedule/denoise-{t}", None, t, float(np.max(np.abs(out - (a2 * x0 + s2 * eps)))), 1e-9


def _guidance():
    c = Concept("c", GaussianMixture.single([1.0, 0.0], 0.3), 0.3)
    u = Concept("u", GaussianMixture.single([-1.0, 0.5], 0.6), 0.7)
    lib = ConceptLibrary([c, u])
    sch = sched_mod.make_vp_schedule(25)
    model = score_model.ScoreModel(lib, sch)
    x = np.random.default_rng(107).normal(size=(20, 2))
    for t in (1, 12, 25):
        sig = sch.coeffs(t)[1]
        e_c = sched_mod.score_to_eps(model.marginal("c", t).score(x), sig)
        e_u = sched_mod.score_to_eps(model.marginal(None, t).score(x), sig)
        yield f"guidance/w1-{t}", 1.0, t, float(np.max(np.abs(model.evaluate(x, t, "c", 1.0) - e_c))), 0.0
        yield f"guidance/w0-{t}", 0.0, t, float(np.max(np.abs(model.evaluate(x, t, "c", 0.0) - e_u))), 1e-12
        before = model.eval_counter
        model.evaluate(x, t, "c", 2.0)
        yield f"guidance/count-{t}", 2.0, t, float(abs(model.eval_counter - before - 2 * len(x))), 0.0


def _matching():
    rng = np.random.default_rng(108)
    s = rng.normal(size=(30, 3))
    yield "matching/self", None, None, float(np.max(np.abs(sampler.matching_score(s, s)))), 0.0
    d1 = sampler.matching_score(s, 1.5 * s + 0.1)
    d2 = sampler.matching_score(4 * s, 4 * (1.5 * s + 0.1))
    yield "matching/scale", None, None, float(np.max(np.abs(d1 - d2))), 1e-12
    ok = sampler.should_switch(0.08, 0.08) and not sampler.should_switch(0.0800001, 0.08)
    yield "matching/threshold", None, None, 0.0 if ok else 1.0, 0.0


def _pair_step_setup():
    f = Concept("freq", GaussianMixture.single([1.0, 0.0], 0.5), 0.9)
    r = Concept("rare", GaussianMixture.single([1.6, 0.2], 0.1), 0.1)
    sch = sched_mod.make_vp_schedule(25)
    model = score_model.ScoreModel(ConceptLibrary([f, r]), sch)
    cfg = sampler.SamplerConfig(alternation="rap")
    x = np.random.default_rng(109).normal(size=(40, 2))
    return f, r, sch, model, cfg, x


def _pair_step_structure():
    f, r, sch, model, cfg, x = _pair_step_setup()
    for t in (25, 14, 3):
        e_f = model.evaluate(x, t - 1, f.id)
        x_pred = sched_mod.denoise_update(x, e_f, sch, t - 1, t - 2)
        e_r = model.evaluate(x_pred, t - 2, r.id)
        want = sched_mod.denoise_update(x, e_r, sch, t - 1, t - 2)
        got, _ = sampler.second_order_pair_step(model, x, f, r, 0.5, sch, t, cfg)
        yield f"pair-step-structure/alpha-half-{t}", 0.5, t, float(np.max(np.abs(got - want))), 0.0
        big, _ = sampler.second_order_pair_step(model, x, f, r, 1e6, sch, t, cfg)
        yield f"pair-step-structure/alpha-large-{t}", 1e6, t, float(np.max(np.abs(big - x_pred))), 1e-5
        cs = (0.1, 0.35, 0.9)
        outs = [sampler.second_order_pair_step(model, x, f, r, 1 / (2 * c), sch, t, cfg)[0] for c in cs]
        lin = outs[0] + (cs[2] - cs[0]) / (cs[1] - cs[0]) * (outs[1] - outs[0])
        yield f"pair-step-structure/affine-{t}", None, t, float(np.max(np.abs(outs[2] - lin))), 1e-10


def dense_reference(mix: GaussianMixture, x, a0: float, s0: float, a1: float, s1: float,
                    substeps: int = 2000) -> np.ndarray:
    """Probability-flow ODE from ``(a0, s0)`` to ``(a1, s1)`` by many small exact-score DDIM steps.

    Uses the VP path parametrised by the angle ``phi`` with ``a = cos(phi)``.
    """
    phis = np.linspace(math.atan2(s0, a0), math.atan2(s1, a1), substeps + 1)
    x = np.array(x, dtype=float)
    for p, q in zip(phis[:-1], phis[1:]):
        a, s = math.cos(p), math.sin(p)
        eps = -s * mix.noisy_marginal(a, s).score(x)
        x0 = (x - s * eps) / a
        x = math.cos(q) * x0 + math.sin(q) * eps
    return x


def heun_vs_euler(t: int = 13, count: int = 200, seed: int = 110):
    """Endpoint errors of the pair step (alpha = 1) and of one first-order step over the same interval."""
    c = Concept("g", GaussianMixture.single([1.2, -0.4], [[0.3, 0.1], [0.1, 0.2]]), 1.0)
    sch = sched_mod.make_vp_schedule(25)
    model = score_model.ScoreModel(ConceptLibrary([c]), sch)
    cfg = sampler.SamplerConfig(alternation="rap")
    a0, s0 = sch.coeffs(t - 1)
    a1, s1 = sch.coeffs(t - 2)
    start = c.distribution.noisy_marginal(a0, s0).sample(count, np.random.default_rng(seed))
    ref = dense_reference(c.distribution, start, a0, s0, a1, s1)
    heun, _ = sampler.second_order_pair_step(model, start, c, c, 1.0, sch, t, cfg)
    euler = sched_mod.denoise_update(start, model.evaluate(start, t - 1, c.id), sch, t - 1, t - 2)
    return (float(np.mean(np.linalg.norm(heun - ref, axis=1))),
            float(np.mean(np.linalg.norm(euler - ref, axis=1))))


def _pair_step_heun():
    for t in (6, 13, 20):
        heun, euler = heun_vs_euler(t)
        yield f"pair-step-heun/t{t}", 1.0, t, heun / euler, 1 - 1e-9


def _degenerate():
    rare = Concept("rare", GaussianMixture.single([0.5, 0.5], 0.2), 0.1)
    other = Concept("other", GaussianMixture.single([-1.0, 0.0], 1.0), 0.9)
    lib = ConceptLibrary([other, rare])
    sch = sched_mod.make_vp_schedule(25)
    spec = score_model.CorruptionSpec(0.7, 0.01, 2.0, 3, frozenset({"rare"}))
    for w in (1.0, 2.0):
        base = dict(guidance_w=w, trajectories=64, seed=5)
        ref, rb = sampler.first_order_sample(score_model.ScoreModel(lib, sch, spec), rare,
                                             sampler.SamplerConfig(alternation="none", **base), sch)
        got, gb = sampler.rap_sample(score_model.ScoreModel(lib, sch, spec), sampler.StageList((rare,)),
                                     sampler.SamplerConfig(alternation="rap", **base), sch)
        same = np.array_equal(ref, got) and np.array_equal(rb.x, gb.x)
        yield f"degenerate/rap-{w:g}", None, None, 0.0 if same else float(np.max(np.abs(ref - got))), 0.0
        got, _ = sampler.r2f_sample(score_model.ScoreModel(lib, sch, spec), sampler.StageList((rare,)),
                                    sampler.R2FSchedule(()), sampler.SamplerConfig(alternation="r2f", **base), sch)
        same = np.array_equal(ref, got)
        yield f"degenerate/r2f-{w:g}", None, None, 0.0 if same else float(np.max(np.abs(ref - got))), 0.0


def sampler_moments(steps: int = 200, count: int = 10000, seed: int = 0):
    """Mean and covariance errors of a long analytic-oracle run on one Gaussian."""
    mean = np.array([1.0, -0.5])
    cov = np.array([[0.6, 0.2], [0.2, 0.4]])
    c = Concept("g", GaussianMixture.single(mean, cov), 1.0)
    sch = sched_mod.make_vp_schedule(steps)
    model = score_model.ScoreModel(ConceptLibrary([c]), sch)
    x, _ = sampler.first_order_sample(model, c, sampler.SamplerConfig(steps=steps, trajectories=count, seed=seed), sch)
    return float(np.max(np.abs(x.mean(axis=0) - mean))), float(np.max(np.abs(np.cov(x.T) - cov)))


def _sampler_moments():
    m_err, c_err = sampler_moments()
    yield "sampler-moments/mean", None, None, m_err, 0.02
    yield "sampler-moments/cov", None, None, c_err, 0.03


SUITES = (
    Suite("concept-score", _concept_score, "mixture score against finite differences"),
    Suite("noisy-marginal", _noisy_marginal, "closed-form noisy marginal against forward-process draws"),
    Suite("schedule", _schedule, "VP identity, monotonicity and exact denoise round trip"),
    Suite("guidance", _guidance, "guidance endpoints and evaluation counter"),
    Suite("matching", _matching, "matching score invariants and threshold"),
    Suite("theorem1-identity", _theorem1_identity, "surrogate score against finite differences"),
    Suite("theorem1-endpoints", _theorem1_endpoints, "surrogate at lambda 0 and 1"),
    Suite("theorem2-direction", _theorem2_direction, "substitution gap grows with separation"),
    Suite("theorem2-dominance", _theorem2_dominance, "surrogate follows the frequent score where rare density is negligible"),
    Suite("pair-step-structure", _pair_step_structure, "pair-step blend identities"),
    Suite("pair-step-heun", _pair_step_heun, "pair step beats one first-order step against a dense reference"),
    Suite("degenerate", _degenerate, "single-stage samplers reduce to the baseline bit for bit"),
    Suite("sampler-moments", _sampler_moments, "long baseline run recovers target moments"),
)


def select(name_filter: str | None):
    if not name_filter:
        return list(SUITES)
    return [s for s in SUITES if name_filter in s.name]


def run_suites(suites) -> tuple[list[tuple[str, bool, float, int]], list[Case]]:
    """Returns per-suite ``(name, passed, worst residual/tol ratio, cases)`` plus all cases."""
    summary, cases = [], []
    for suite in suites:
        worst, ok, n = 0.0, True, 0
        for case in suite.run():
            cases.append(case)
            n += 1
            _, _, _, res, tol = case
            passed = bool(res <= tol)
            ok &= passed
            worst = max(worst, res)
        summary.append((suite.name, ok and n > 0, worst, n))
    return summary, cases
