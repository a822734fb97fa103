"""Noise-prediction evaluators with classifier-free guidance.

``ScoreModel`` stands in for a trained diffusion network.  The analytic kind
returns the exact noise prediction of each concept's noisy marginal; the
corrupted kind adds a smooth random field to the conditional score of selected
concepts, strongest where that concept has little density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .concepts import ConceptLibrary, GaussianMixture, _as_batch
from .schedule import NoiseSchedule, score_to_eps

ANALYTIC = "analytic-oracle"
CORRUPTED = "corrupted"


class RandomFourierField:
    """Smooth vector field with ``|g(x)| <= 1``.

    Each output coordinate averages ``n_features`` cosines with frequencies of
    norm ``bandwidth`` (uniform directions) and uniform phases, scaled by
    ``1/sqrt(d)``.  Any directional derivative is therefore bounded by
    ``bandwidth``.
    """

    def __init__(self, dim: int, bandwidth: float, seed: int, n_features: int = 64):
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((dim, n_features, dim))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        self.dim = dim
        self.omegas = bandwidth * dirs
        self.phases = rng.uniform(0.0, 2.0 * math.pi, size=(dim, n_features))
        self._scale = 1.0 / (n_features * math.sqrt(dim))
        self.omegas.setflags(write=False)
        self.phases.setflags(write=False)

    def __call__(self, x) -> np.ndarray:
        xb, single = _as_batch(x, self.dim)
        arg = (xb[:, None, None, :] * self.omegas[None]).sum(axis=-1) + self.phases
        out = np.cos(arg).sum(axis=-1) * self._scale
        return out[0] if single else out


@dataclass(frozen=True)
class CorruptionSpec:
    amplitude: float
    density_floor: float
    bandwidth: float
    field_seed: int
    targets: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if not self.density_floor > 0:
            raise ValueError("density_floor must be positive")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "targets", frozenset(self.targets))

    def field(self, dim: int) -> RandomFourierField:
        return RandomFourierField(dim, self.bandwidth, self.field_seed)


def corruption_field(spec: CorruptionSpec, x, local_density, g: RandomFourierField | None = None):
    """``g(x) * amplitude / (1 + local_density / density_floor)``."""
    xb, single = _as_batch(x, np.asarray(x).shape[-1])
    if g is None:
        g = spec.field(xb.shape[1])
    dens = np.broadcast_to(np.asarray(local_density, dtype=float), (xb.shape[0],))
    if np.any(dens < 0):
        raise ValueError("local density must be nonnegative")
    if spec.amplitude == 0:
        out = np.zeros_like(xb)
    else:
        out = g(xb) * (spec.amplitude / (1.0 + dens / spec.density_floor))[:, None]
    return out[0] if single else out


class ScoreModel:
    """Evaluator for the guided noise prediction ``eps(x, t, concept)``.

    ``eval_counter`` counts denoiser evaluations per point: a batch of ``N``
    points costs ``N`` (``2N`` under guidance, conditional plus unconditional).
    """

    def __init__(self, library: ConceptLibrary, schedule: NoiseSchedule,
                 corruption: CorruptionSpec | None = None, kind: str | None = None):
        if kind is None:
            kind = ANALYTIC if corruption is None else CORRUPTED
        if kind not in (ANALYTIC, CORRUPTED):
            raise ValueError(f"unknown score model kind {kind!r}")
        if kind == CORRUPTED and corruption is None:
            raise ValueError("a corrupted model needs a CorruptionSpec")
        if corruption is not None:
            unknown = set(corruption.targets) - set(library)
            if unknown:
                raise KeyError(f"corruption targets not in library: {sorted(unknown)}")
        self.kind = kind
        self.library = library
        self.schedule = schedule
        self.corruption = corruption if kind == CORRUPTED else None
        self.eval_counter = 0
        self._field = self.corruption.field(library.dim) if self.corruption else None
        self._marginals: dict[tuple[str | None, int], GaussianMixture] = {}

    def marginal(self, concept_id: str | None, t: int) -> GaussianMixture:
        """Noisy marginal of a concept (``None`` for unconditional) at level ``t``."""
        key = (concept_id, t)
        m = self._marginals.get(key)
        if m is None:
            base = self.library.unconditional if concept_id is None else self.library[concept_id].distribution
            m = base.noisy_marginal(*self.schedule.coeffs(t))
            self._marginals[key] = m
        return m

    def conditional_score(self, x, t: int, concept_id: str) -> np.ndarray:
        m = self.marginal(concept_id, t)
        s = m.score(x)
        spec = self.corruption
        if spec is not None and concept_id in spec.targets and spec.amplitude != 0:
            dens = np.exp(m.log_density(x))
            s = s + corruption_field(spec, x, dens, self._field)
        return s

    def evaluate(self, x, t: int, concept_id: str, guidance_w: float = 1.0,
                 return_conditional: bool = False):
        """Guided noise prediction ``eps_u + w * (eps_c - eps_u)``.

        With ``return_conditional`` the unguided conditional prediction is
        returned as a second value.
        """
        if concept_id not in self.library:
            raise KeyError(f"unknown concept id {concept_id!r}")
        if guidance_w < 0:
            raise ValueError("guidance weight must be nonnegative")
        if not 0 <= t <= self.schedule.steps:
            raise ValueError(f"timestep {t} outside 0..{self.schedule.steps}")
        x = np.asarray(x, dtype=float)
        n = 1 if x.ndim == 1 else x.shape[0]
        sigma_t = self.schedule.coeffs(t)[1]
        eps_c = score_to_eps(self.conditional_score(x, t, concept_id), sigma_t)
        if guidance_w == 1:
            self.eval_counter += n
            out = eps_c
        else:
            self.eval_counter += 2 * n
            eps_u = score_to_eps(self.marginal(None, t).score(x), sigma_t)
            out = eps_u + guidance_w * (eps_c - eps_u)
        return (out, eps_c) if return_conditional else out


def evaluate(model: ScoreModel, x, t: int, concept_id: str, guidance_w: float = 1.0):
    return model.evaluate(x, t, concept_id, guidance_w)
