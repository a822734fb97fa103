"""Built-in scenario library.

Each scenario is a TOML file next to this package (``rarepath/scenarios``)
holding a concept library, the ordered stage list and optional ``[sampler]``
and ``[corruption]`` defaults.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

from ..concepts import ConceptLibrary
from ..library_io import library_from_dict
from ..sampler import StageList

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BUILTIN = ("offset-narrow", "three-stage", "disjoint")
SCENARIO_KEYS = {"name", "stages", "concept", "sampler", "corruption"}


@dataclass(frozen=True)
class Scenario:
    name: str
    library: ConceptLibrary
    stage_ids: tuple[str, ...]
    sampler: dict[str, Any] = field(default_factory=dict)
    corruption: dict[str, Any] | None = None

    def stages(self, ids=None) -> StageList:
        ids = self.stage_ids if ids is None else ids
        return StageList(tuple(self.library[c] for c in ids))

    @property
    def rare(self):
        return self.library[self.stage_ids[-1]]


def scenario_from_dict(doc: dict[str, Any], name: str | None = None) -> Scenario:
    unknown = set(doc) - SCENARIO_KEYS
    if unknown:
        raise KeyError(f"unknown scenario key(s) {sorted(unknown)}")
    lib = library_from_dict(doc)
    if sum(c.prior for c in lib.values()) > 1 + 1e-9:
        raise ValueError("concept priors sum to more than 1")
    stage_ids = tuple(doc.get("stages") or ())
    if not stage_ids:
        raise ValueError("scenario needs a nonempty stages list")
    for s in stage_ids:
        if s not in lib:
            raise KeyError(f"stage {s!r} is not a concept of the scenario")
    return Scenario(name or doc.get("name", "inline"), lib, stage_ids,
                    dict(doc.get("sampler", {})), doc.get("corruption"))


def builtin_doc(name: str) -> dict[str, Any]:
    if name not in BUILTIN:
        raise KeyError(f"unknown scenario {name!r}; built-ins are {', '.join(BUILTIN)}")
    text = resources.files("rarepath").joinpath("scenarios", f"{name}.toml").read_text()
    return tomllib.loads(text)


def load_scenario(name: str) -> Scenario:
    return scenario_from_dict(builtin_doc(name), name)
