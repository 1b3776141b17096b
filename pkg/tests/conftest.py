import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flyingbelt import multibody as mb  # noqa: E402
from flyingbelt import optim  # noqa: E402
from flyingbelt.modal import NOMINAL_MODES  # noqa: E402
from flyingbelt.plant import NOMINAL_PLANT  # noqa: E402


@pytest.fixture(scope="session")
def plant():
    return NOMINAL_PLANT


@pytest.fixture(scope="session")
def rest(plant):
    return mb.static_equilibrium(plant)


@pytest.fixture(scope="session")
def topt_design():
    return optim.design(optim.DesignRequest(NOMINAL_MODES, 0.01, 0.0))


@pytest.fixture(scope="session")
def h2_design():
    return optim.design(optim.DesignRequest(NOMINAL_MODES, 0.01, 0.15))


@pytest.fixture(scope="session")
def free_decay_record(plant):
    from flyingbelt.cli import free_decay

    return free_decay(plant)


HALF_TURN = math.pi


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
