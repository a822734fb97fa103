import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rarepath.schedule import score_to_eps
from rarepath.score_model import (ANALYTIC, CORRUPTED, CorruptionSpec, RandomFourierField, ScoreModel,
                                  corruption_field)


def test_analytic_eps_matches_marginal(two_concepts, sched, rng):
    f, r, lib = two_concepts
    m = ScoreModel(lib, sched)
    assert m.kind == ANALYTIC
    x = rng.normal(size=(6, 2))
    a, s = sched.coeffs(9)
    want = score_to_eps(r.distribution.noisy_marginal(a, s).score(x), s)
    assert np.array_equal(m.evaluate(x, 9, "rare"), want)


def test_guidance_blend(two_concepts, sched, rng):
    f, r, lib = two_concepts
    m = ScoreModel(lib, sched)
    x = rng.normal(size=(6, 2))
    e_c = m.evaluate(x, 12, "rare", 1.0)
    e_u = m.evaluate(x, 12, "rare", 0.0)
    assert np.allclose(m.evaluate(x, 12, "rare", 3.0), e_u + 3.0 * (e_c - e_u), atol=1e-12)


def test_counter_per_point(two_concepts, sched):
    _, _, lib = two_concepts
    m = ScoreModel(lib, sched)
    m.evaluate(np.zeros((7, 2)), 5, "freq")
    assert m.eval_counter == 7
    m.evaluate(np.zeros(2), 5, "freq", 2.0)
    assert m.eval_counter == 9


def test_errors(two_concepts, sched):
    _, _, lib = two_concepts
    m = ScoreModel(lib, sched)
    with pytest.raises(KeyError):
        m.evaluate(np.zeros(2), 5, "nope")
    with pytest.raises(ValueError):
        m.evaluate(np.zeros(2), 5, "freq", -1.0)
    with pytest.raises(ValueError):
        m.evaluate(np.zeros(2), 26, "freq")
    with pytest.raises(KeyError):
        ScoreModel(lib, sched, CorruptionSpec(1.0, 0.01, 1.0, 0, {"ghost"}))


def test_zero_amplitude_is_bit_identical(two_concepts, sched, rng):
    _, _, lib = two_concepts
    clean = ScoreModel(lib, sched)
    quiet = ScoreModel(lib, sched, CorruptionSpec(0.0, 0.01, 2.0, 3, {"rare"}))
    assert quiet.kind == CORRUPTED
    x = rng.normal(size=(10, 2))
    for t in (1, 13, 25):
        assert np.array_equal(clean.evaluate(x, t, "rare", 2.0), quiet.evaluate(x, t, "rare", 2.0))


def test_corruption_targets_only(two_concepts, sched, rng):
    _, _, lib = two_concepts
    clean = ScoreModel(lib, sched)
    bad = ScoreModel(lib, sched, CorruptionSpec(1.0, 0.01, 2.0, 3, {"rare"}))
    x = rng.normal(size=(10, 2))
    assert np.array_equal(clean.evaluate(x, 8, "freq", 2.0), bad.evaluate(x, 8, "freq", 2.0))
    assert not np.allclose(clean.evaluate(x + 5, 8, "rare"), bad.evaluate(x + 5, 8, "rare"))


def test_corruption_attenuates_with_density():
    spec = CorruptionSpec(2.0, 0.01, 1.0, 5)
    x = np.array([[0.3, -0.2]])
    low = corruption_field(spec, x, 0.0)
    high = corruption_field(spec, x, 100.0)
    assert np.allclose(high, low / (1 + 100.0 / 0.01))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10000), bw=st.floats(0.1, 5.0), d=st.integers(1, 3))
def test_fourier_field_bounds(seed, bw, d):
    g = RandomFourierField(d, bw, seed)
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 5, (50, d))
    assert np.all(np.linalg.norm(g(x), axis=1) <= 1 + 1e-12)
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    h = 1e-5
    deriv = np.linalg.norm((g(x + h * u) - g(x - h * u)) / (2 * h), axis=1)
    assert np.all(deriv <= bw + 1e-6)
