import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jcitransfer.admg import Admg, JciBackground, SeparationQuery, make_universe  # noqa: E402
from jcitransfer.stats import WeightedConstraint  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def five_vars():
    return make_universe(["C1", "C2"], ["X1", "X2", "X3"])


@pytest.fixture(scope="session")
def chain_graph(five_vars):
    # C1 <-> C2, C2 -> X1 -> X2 -> X3 <- C1
    return Admg(five_vars, frozenset({(1, 2), (2, 3), (3, 4), (0, 4)}), frozenset({(0, 1)}))


@pytest.fixture(scope="session")
def chain_bg():
    return JciBackground(c1=0, y=3)


@pytest.fixture(scope="session")
def shift_graph():
    u = make_universe(["C1"], ["X1", "X2", "X3"])
    # C1 -> X1, C1 -> X3, X1 -> X2, X2 -> X3
    return Admg(u, frozenset({(0, 1), (0, 3), (1, 2), (2, 3)}))


@pytest.fixture(scope="session")
def source_facts():
    """Three source-domain facts that alone certify {X1}, lifted by adding C1."""
    return [
        WeightedConstraint(SeparationQuery(1, 3, frozenset({2, 0})), True, math.inf),
        WeightedConstraint(SeparationQuery(1, 3, frozenset({0})), False, math.inf),
        WeightedConstraint(SeparationQuery(1, 4, frozenset({3, 0})), True, math.inf),
    ]
