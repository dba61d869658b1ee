import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from egoexplore.geometry import CameraModel, build_projection  # noqa: E402
from egoexplore.world import build_graph, generate_floorplan  # noqa: E402

from helpers import ACCEPTANCE_LINES  # noqa: E402


@pytest.fixture(scope="session")
def cam():
    return CameraModel()


@pytest.fixture(scope="session")
def proj(cam):
    return build_projection(cam, 0.05)


@pytest.fixture(scope="session")
def plan7():
    return generate_floorplan(7)


@pytest.fixture(scope="session")
def graph7(plan7):
    return build_graph(plan7, 0.15)


@pytest.fixture(scope="session")
def vis_oracle(cam):
    from oracles import VisibilityOracle
    return VisibilityOracle(cam, 0.05, cam.max_range_m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
