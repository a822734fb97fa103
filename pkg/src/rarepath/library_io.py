"""Load concept libraries from TOML.

Schema::

    [[concept]]
    id = "anchor"            # unique, nonempty
    prior = 0.9              # in (0, 1]

    [[concept.component]]
    weight = 1.0             # component weights of a concept sum to 1
    mean = [2.0, 0.0]
    cov = [0.5, 0.5]         # diagonal (length d), full row-major (length d*d)
                             # or nested rows [[..], [..]]

Keys other than these raise ``LibraryFormatError``.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .concepts import Concept, ConceptLibrary, GaussianComponent, GaussianMixture

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class LibraryFormatError(ValueError):
    pass


_CONCEPT_KEYS = {"id", "prior", "component"}
_COMPONENT_KEYS = {"weight", "mean", "cov"}


def _cov(raw, d: int, where: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 1 and arr.shape[0] == d:
        return np.diag(arr)
    if arr.ndim == 1 and arr.shape[0] == d * d:
        return arr.reshape(d, d)
    raise LibraryFormatError(f"{where}: cov must have {d} or {d * d} entries, got shape {arr.shape}")


def concept_from_dict(doc: Mapping[str, Any]) -> Concept:
    unknown = set(doc) - _CONCEPT_KEYS
    if unknown:
        raise LibraryFormatError(f"unknown concept key(s) {sorted(unknown)}")
    try:
        cid, prior, comps = doc["id"], doc["prior"], doc["component"]
    except KeyError as exc:
        raise LibraryFormatError(f"concept is missing {exc.args[0]!r}") from None
    parts = []
    for i, c in enumerate(comps):
        where = f"concept {cid!r} component {i}"
        unknown = set(c) - _COMPONENT_KEYS
        if unknown:
            raise LibraryFormatError(f"{where}: unknown key(s) {sorted(unknown)}")
        mean = np.asarray(c["mean"], dtype=float)
        parts.append(GaussianComponent(c.get("weight", 1.0), mean, _cov(c["cov"], mean.shape[0], where)))
    return Concept(str(cid), GaussianMixture(parts), float(prior))


def library_from_dict(doc: Mapping[str, Any]) -> ConceptLibrary:
    concepts = doc.get("concept")
    if not concepts:
        raise LibraryFormatError("document has no [[concept]] entries")
    return ConceptLibrary(concept_from_dict(c) for c in concepts)


def load_library(path) -> ConceptLibrary:
    with open(Path(path), "rb") as fh:
        return library_from_dict(tomllib.load(fh))
