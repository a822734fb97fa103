import numpy as np
import pytest

from rarepath.concepts import Concept, ConceptLibrary, GaussianMixture
from rarepath.schedule import make_vp_schedule

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def sched():
    return make_vp_schedule(25)


@pytest.fixture
def two_concepts():
    f = Concept("freq", GaussianMixture.single([1.0, 0.0], 0.5), 0.9)
    r = Concept("rare", GaussianMixture.single([1.6, 0.2], 0.1), 0.1)
    return f, r, ConceptLibrary([f, r])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
