"""Concepts as Gaussian mixtures with closed-form densities and scores.

Every routine accepts either a single point of shape ``(d,)`` or a batch of
shape ``(N, d)`` and returns a matching scalar/vector or batch.  Batched
arithmetic is written with broadcasting and small-axis reductions only (no
BLAS calls) so that the value computed for one row never depends on which
other rows share the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.special import logsumexp

_LOG_2PI = math.log(2.0 * math.pi)
_MIN_EIG = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return xb, single


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian.  ``cov`` may be given as a diagonal vector."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)
    inv_chol: np.ndarray = field(init=False, repr=False, compare=False)
    log_det: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = np.full(mean.shape[0], float(cov))
        if cov.ndim == 1:
            cov = np.diag(cov)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match mean dimension {d}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if not self.weight > 0:
            raise ValueError(f"component weight must be positive, got {self.weight}")
        if np.linalg.eigvalsh(cov).min() < _MIN_EIG:
            raise ValueError("covariance is singular or not positive definite")
        chol = np.linalg.cholesky(cov)
        inv_chol = np.linalg.inv(chol)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))
        object.__setattr__(self, "chol", _frozen(chol))
        object.__setattr__(self, "inv_chol", _frozen(inv_chol))
        object.__setattr__(self, "log_det", float(2.0 * np.log(np.diag(chol)).sum()))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def with_weight(self, weight: float) -> "GaussianComponent":
        return GaussianComponent(weight, self.mean, self.cov)


class GaussianMixture:
    """An immutable finite mixture of Gaussians sharing one dimension."""

    def __init__(self, components: Iterable[GaussianComponent]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        dim = comps[0].dim
        if any(c.dim != dim for c in comps):
            raise ValueError("all components must share a dimension")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights sum to {total}, expected 1")
        self._components = comps
        self._dim = dim
        self.weights = _frozen([c.weight for c in comps])
        self.log_weights = _frozen(np.log(self.weights))
        self.means = _frozen(np.stack([c.mean for c in comps]))
        self.covs = _frozen(np.stack([c.cov for c in comps]))
        self.chols = _frozen(np.stack([c.chol for c in comps]))
        self.inv_chols = _frozen(np.stack([c.inv_chol for c in comps]))
        self.log_dets = _frozen([c.log_det for c in comps])

    @classmethod
    def single(cls, mean, cov) -> "GaussianMixture":
        return cls([GaussianComponent(1.0, mean, cov)])

    @property
    def components(self) -> tuple[GaussianComponent, ...]:
        return self._components

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self) -> int:
        return len(self._components)

    def __repr__(self) -> str:
        return f"GaussianMixture(dim={self._dim}, components={len(self)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (
            len(self) == len(other)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.covs, other.covs)
        )

    __hash__ = None

    def _whitened(self, xb: np.ndarray) -> np.ndarray:
        # z[n, k] = L_k^{-1} (x_n - mu_k), shape (N, K, d)
        diff = xb[:, None, :] - self.means[None, :, :]
        return (diff[:, :, None, :] * self.inv_chols[None, :, :, :]).sum(axis=-1)

    def _component_log_joint(self, z: np.ndarray) -> np.ndarray:
        maha = (z * z).sum(axis=-1)
        return self.log_weights - 0.5 * (maha + self.log_dets + self._dim * _LOG_2PI)

    def log_density(self, x):
        xb, single = _as_batch(x, self._dim)
        out = logsumexp(self._component_log_joint(self._whitened(xb)), axis=1)
        return float(out[0]) if single else out

    def responsibilities(self, x) -> np.ndarray:
        xb, single = _as_batch(x, self._dim)
        lj = self._component_log_joint(self._whitened(xb))
        gamma = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        return gamma[0] if single else gamma

    def score(self, x):
        xb, single = _as_batch(x, self._dim)
        z = self._whitened(xb)
        lj = self._component_log_joint(z)
        gamma = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        # Sigma_k^{-1}(mu_k - x) = -L_k^{-T} z_k
        comp = -(z[:, :, :, None] * self.inv_chols[None, :, :, :]).sum(axis=-2)
        out = (gamma[:, :, None] * comp).sum(axis=1)
        return out[0] if single else out

    def sample(self, count: int, rng: np.random.Generator, return_labels: bool = False):
        if count < 1:
            raise ValueError("count must be at least 1")
        labels = rng.choice(len(self), size=count, p=self.weights)
        noise = rng.standard_normal((count, self._dim))
        pts = self.means[labels] + (self.chols[labels] * noise[:, None, :]).sum(axis=-1)
        return (pts, labels) if return_labels else pts

    def noisy_marginal(self, a_t: float, sigma_t: float) -> "GaussianMixture":
        """Law of ``a_t * x0 + sigma_t * noise`` for ``x0`` drawn from this mixture."""
        if a_t < 0 or sigma_t < 0:
            raise ValueError("noise coefficients must be nonnegative")
        if a_t == 0 and sigma_t == 0:
            raise ValueError("a_t and sigma_t cannot both be zero")
        eye = np.eye(self._dim)
        return GaussianMixture(
            GaussianComponent(c.weight, a_t * c.mean, a_t * a_t * c.cov + sigma_t * sigma_t * eye)
            for c in self._components
        )


def log_density(m: GaussianMixture, x):
    return m.log_density(x)


def score(m: GaussianMixture, x):
    return m.score(x)


def sample(m: GaussianMixture, count: int, rng: np.random.Generator, return_labels: bool = False):
    return m.sample(count, rng, return_labels=return_labels)


def noisy_marginal(m: GaussianMixture, a_t: float, sigma_t: float) -> GaussianMixture:
    return m.noisy_marginal(a_t, sigma_t)


@dataclass(frozen=True)
class Concept:
    id: str
    distribution: GaussianMixture
    prior: float

    def __post_init__(self):
        if not self.id:
            raise ValueError("concept id must be nonempty")
        if not 0 < self.prior <= 1:
            raise ValueError(f"concept prior must lie in (0, 1], got {self.prior}")

    @property
    def dim(self) -> int:
        return self.distribution.dim


class ConceptLibrary(Mapping[str, Concept]):
    """Concepts keyed by id, plus the unconditional (null-prompt) mixture."""

    def __init__(self, concepts: Iterable[Concept], unconditional: GaussianMixture | None = None):
        self._concepts: dict[str, Concept] = {}
        for c in concepts:
            if c.id in self._concepts:
                raise ValueError(f"duplicate concept id {c.id!r}")
            self._concepts[c.id] = c
        if not self._concepts:
            raise ValueError("concept library is empty")
        dims = {c.dim for c in self._concepts.values()}
        if len(dims) != 1:
            raise ValueError("all concepts in a library must share a dimension")
        self.dim = dims.pop()
        if unconditional is None:
            unconditional = unconditional_mixture(self._concepts.values())
        elif unconditional.dim != self.dim:
            raise ValueError("unconditional mixture dimension does not match the concepts")
        self.unconditional = unconditional

    def __getitem__(self, key: str) -> Concept:
        try:
            return self._concepts[key]
        except KeyError:
            raise KeyError(f"unknown concept id {key!r}") from None

    def __iter__(self):
        return iter(self._concepts)

    def __len__(self) -> int:
        return len(self._concepts)

    def __repr__(self) -> str:
        return f"ConceptLibrary({list(self._concepts)})"


def unconditional_mixture(lib) -> GaussianMixture:
    """Prior-weighted union of every concept's components, renormalized."""
    concepts = list(lib.values()) if isinstance(lib, Mapping) else list(lib)
    if not concepts:
        raise ValueError("cannot build an unconditional mixture from an empty library")
    total = sum(c.prior for c in concepts)
    parts = []
    for c in concepts:
        for comp in c.distribution.components:
            parts.append((c.prior / total) * comp.weight)
    norm = sum(parts)
    comps = []
    it = iter(parts)
    for c in concepts:
        for comp in c.distribution.components:
            comps.append(comp.with_weight(next(it) / norm))
    return GaussianMixture(comps)
