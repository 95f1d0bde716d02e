import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blochpdc.config import parse_config  # noqa: E402
from blochpdc.materials import Material  # noqa: E402
from blochpdc.structure import BraggStructure  # noqa: E402

LOW = Material.constant("low", 1.0)
HIGH = Material.constant("high", 5.0)


def illustrative(periods=15):
    """n = 1 / n = 5 stack, period 100 nm, a quarter of it low index."""
    return BraggStructure(LOW, 25.0, HIGH, 75.0, periods)


def uniform(n=2.0, a=40.0, b=60.0):
    m = Material.constant("uniform", n)
    return BraggStructure(m, a, m, b)


@pytest.fixture(scope="session")
def illus():
    return illustrative()


@pytest.fixture(scope="session")
def example_cfg():
    return parse_config("algaas_air")


@pytest.fixture(scope="session")
def example(example_cfg):
    return example_cfg.structure


@pytest.fixture(scope="session")
def example_spec(example_cfg):
    return example_cfg.process


def omega_to_lambda(structure, omega_norm):
    """Free-space wavelength (nm) for omega L / (pi c)."""
    return 2 * structure.period / omega_norm


TWO_PI = 2 * math.pi


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
