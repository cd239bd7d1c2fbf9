import numpy as np
import pytest
from hypothesis import settings, strategies as st

from archsage import archspace
from archsage.archspace import CellSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@st.composite
def cells(draw, params=archspace.SpaceParams()):
    seed = draw(st.integers(0, 2**32 - 1))
    return archspace.sample_random(np.random.default_rng(seed), params)


def chain(*interior):
    """INPUT -> interior... -> OUTPUT as a straight line."""
    ops = ["INPUT", *interior, "OUTPUT"]
    v = len(ops)
    adj = np.zeros((v, v), dtype=int)
    for i in range(v - 1):
        adj[i, i + 1] = 1
    return CellSpec(adj, ops)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report one line each; printed after the run so capture does not hide them
CRITERIA = {}


def report_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    CRITERIA[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
