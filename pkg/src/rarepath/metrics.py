"""Independent oracles and sample-quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import chi2, wasserstein_distance

from .concepts import GaussianComponent, GaussianMixture


class OracleError(ArithmeticError):
    """An oracle met a value it cannot work with (e.g. a non-finite function value)."""


@dataclass(frozen=True)
class GapStats:
    mean_abs: float
    max_abs: float
    mean_rel: float
    max_rel: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("gap statistics need at least one point")
        slack = 1 + 1e-12
        if not (0 <= self.mean_abs <= self.max_abs * slack and 0 <= self.mean_rel <= self.max_rel * slack):
            raise ValueError("inconsistent gap statistics")


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar field."""
    if not h > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        step = np.zeros_like(x)
        step[i] = h
        hi, lo = float(f(x + step)), float(f(x - step))
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise OracleError(f"non-finite function value near coordinate {i}")
        grad[i] = (hi - lo) / (2 * h)
    return grad


def nll(m: GaussianMixture, samples) -> float:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("nll needs at least one sample")
    return float(-np.mean(m.log_density(samples)))


def sliced_wasserstein(A, B, n_proj: int, rng: np.random.Generator) -> float:
    """Mean 1-D Wasserstein-1 distance over random projection directions."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] < 2 or B.shape[0] < 2:
        raise ValueError("need at least two points per sample set")
    if A.shape[1] != B.shape[1]:
        raise ValueError("sample sets differ in dimension")
    if n_proj < 1:
        raise ValueError("n_proj must be at least 1")
    dirs = rng.standard_normal((n_proj, A.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    total = 0.0
    for u in dirs:
        pa = (A * u).sum(axis=1)
        pb = (B * u).sum(axis=1)
        if pa.shape == pb.shape:
            total += float(np.mean(np.abs(np.sort(pa) - np.sort(pb))))
        else:
            total += wasserstein_distance(pa, pb)
    return total / n_proj


def chi2_quantile(q: float, dof: int) -> float:
    """Chi-square quantile."""
    if not 0 < q < 1:
        raise ValueError("quantile must lie in (0, 1)")
    return float(chi2.ppf(q, dof))


# 0.95 quantiles for d = 1, 2, 3 (d = 2 is 2 ln 20 exactly)
CHI2_95 = {1: 3.841458820694124, 2: 5.991464547107979, 3: 7.814727903251179}


def concept_hit_rate(samples, target: GaussianComponent, quantile: float = 0.95) -> float:
    """Fraction of samples inside the target's ``quantile`` Mahalanobis ellipsoid."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    d = target.dim
    if d not in CHI2_95:
        raise ValueError(f"hit rate supports dimensions 1-3, got {d}")
    if samples.shape[1] != d:
        raise ValueError("sample dimension does not match the target")
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    thresh = CHI2_95[d] if quantile == 0.95 else chi2_quantile(quantile, d)
    z = ((samples - target.mean)[:, None, :] * target.inv_chol[None]).sum(axis=-1)
    return float(np.mean((z * z).sum(axis=1) <= thresh))


def kendall_tau(series: Sequence[float]) -> float:
    """Kendall tau-a of a series against its index; ties add nothing."""
    s = np.asarray(series, dtype=float)
    n = s.shape[0]
    if n < 2:
        raise ValueError("kendall tau needs at least two values")
    sign = np.sign(s[None, :] - s[:, None])
    return float(np.triu(sign, k=1).sum() / (n * (n - 1) / 2))


def mode_attribution(samples, stages) -> np.ndarray:
    """Share of samples whose highest clean log density comes from each stage.

    Ties go to the lower stage index.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("mode attribution needs samples")
    scores = np.stack([c.distribution.log_density(samples) for c in stages], axis=1)
    winners = np.argmax(scores, axis=1)
    return np.bincount(winners, minlength=len(stages)) / samples.shape[0]
