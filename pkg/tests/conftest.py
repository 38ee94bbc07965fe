import math
import sys

import numpy as np
import pytest

from platepml.config import ScenarioConfig
from platepml.meshing import CavityShape, CellGeometry, generate_mesh, strip_mesh
from platepml.pml import MaterialParams, PmlProfile
from platepml.spectral import IncidentWave


@pytest.fixture(scope="session")
def profile():
    return PmlProfile(0.5, -0.5, 2.5, 2.5, 14.0, 5.0, 4)


@pytest.fixture(scope="session")
def wave():
    return IncidentWave(math.pi, math.pi / 3)


@pytest.fixture(scope="session")
def material():
    return MaterialParams(math.pi, 0.5)


@pytest.fixture(scope="session")
def cell():
    return CellGeometry(1.0, 0.5, -0.5, 2.5, 2.5)


@pytest.fixture(scope="session")
def circle():
    return CavityShape("circle", radius=0.3, center=(0.5, 0.0))


@pytest.fixture(scope="session")
def coarse_mesh(cell, circle):
    return generate_mesh(cell, circle, 0.1)


@pytest.fixture(scope="session")
def mesh05(cell, circle):
    return generate_mesh(cell, circle, 0.05)


@pytest.fixture(scope="session")
def empty_strip(cell):
    return strip_mesh(cell, 0.1)


@pytest.fixture
def config(tmp_path):
    cfg = ScenarioConfig()
    cfg.output_dir = str(tmp_path / "out")
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for number in sorted(verdicts):
            terminalreporter.write_line(verdicts[number])
