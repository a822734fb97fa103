import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from rarepath.concepts import (Concept, ConceptLibrary, GaussianComponent, GaussianMixture,
                               unconditional_mixture)
from rarepath.harness.verify import random_mixture, richardson_grad


def test_single_gaussian_matches_scipy(rng):
    cov = np.array([[0.6, 0.2], [0.2, 0.4]])
    m = GaussianMixture.single([1.0, -0.5], cov)
    x = rng.normal(size=(10, 2))
    ref = multivariate_normal([1.0, -0.5], cov).logpdf(x)
    assert np.allclose(m.log_density(x), ref, rtol=0, atol=1e-12)
    assert np.allclose(m.score(x), -(x - [1.0, -0.5]) @ np.linalg.inv(cov), atol=1e-12)


def test_mixture_density_matches_scipy(rng):
    m = random_mixture(rng, 3)
    x = rng.normal(size=(20, 3))
    ref = np.log(sum(c.weight * multivariate_normal(c.mean, c.cov).pdf(x) for c in m.components))
    assert np.allclose(m.log_density(x), ref, rtol=1e-12, atol=1e-12)


def test_far_point_density_is_finite():
    m = GaussianMixture([GaussianComponent(0.5, [0.0], 0.01), GaussianComponent(0.5, [1.0], 0.01)])
    assert math.isfinite(m.log_density(np.array([60.0])))
    assert np.all(np.isfinite(m.score(np.array([60.0]))))


def test_diag_cov_and_scalar_cov_agree():
    a = GaussianComponent(1.0, [0.0, 1.0], 0.3)
    b = GaussianComponent(1.0, [0.0, 1.0], [0.3, 0.3])
    assert np.array_equal(a.cov, b.cov)


@pytest.mark.parametrize("cov", [[[1.0, 0.5], [0.4, 1.0]], [[1.0, 0.0], [0.0, 0.0]], [[1.0, 2.0], [2.0, 1.0]]])
def test_bad_covariances_rejected(cov):
    with pytest.raises(ValueError):
        GaussianComponent(1.0, [0.0, 0.0], cov)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        GaussianMixture([GaussianComponent(0.4, [0.0], 1.0), GaussianComponent(0.4, [1.0], 1.0)])


def test_dimension_mismatch_raises():
    m = GaussianMixture.single([0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        m.log_density(np.zeros(3))


def test_sample_moments(rng):
    m = GaussianMixture.single([2.0, -1.0], [[0.5, 0.1], [0.1, 0.3]])
    x = m.sample(50000, rng)
    assert np.allclose(x.mean(axis=0), [2.0, -1.0], atol=0.02)
    assert np.allclose(np.cov(x.T), m.covs[0], atol=0.02)


def test_noisy_marginal_identity_at_clean_level(rng):
    m = random_mixture(rng, 2)
    assert m.noisy_marginal(1.0, 0.0) == m


def test_noisy_marginal_rejects_degenerate():
    m = GaussianMixture.single([0.0], 1.0)
    with pytest.raises(ValueError):
        m.noisy_marginal(0.0, 0.0)


def test_library_lookup_and_unconditional():
    a = Concept("a", GaussianMixture.single([0.0], 1.0), 0.75)
    b = Concept("b", GaussianMixture.single([3.0], 1.0), 0.25)
    lib = ConceptLibrary([a, b])
    assert np.allclose(lib.unconditional.weights, [0.75, 0.25])
    assert lib.unconditional == unconditional_mixture([a, b])
    with pytest.raises(KeyError):
        lib["missing"]
    with pytest.raises(ValueError):
        ConceptLibrary([a, a])


def test_concept_prior_range():
    with pytest.raises(ValueError):
        Concept("x", GaussianMixture.single([0.0], 1.0), 0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3))
def test_score_is_gradient_of_log_density(seed, d):
    rng = np.random.default_rng(seed)
    m = random_mixture(rng, d)
    x = m.sample(1, rng)[0]
    fd = richardson_grad(m.log_density, x, 1e-3)
    assert np.linalg.norm(m.score(x) - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-12) + 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3))
def test_responsibilities_sum_to_one(seed, d):
    rng = np.random.default_rng(seed)
    m = random_mixture(rng, d)
    g = m.responsibilities(rng.normal(0, 4, (16, d)))
    assert np.all(g >= 0) and np.allclose(g.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40))
def test_batch_rows_do_not_depend_on_batch(seed, n):
    rng = np.random.default_rng(seed)
    m = random_mixture(rng, 2)
    x = rng.normal(size=(n, 2))
    batch = m.score(x)
    for i in range(n):
        assert np.array_equal(batch[i], m.score(x[i]))
