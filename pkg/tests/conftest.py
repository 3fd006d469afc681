import numpy as np
import pytest

from conclab.geometry import ComplexProjective, RealProjective, Sphere

ACCEPTANCE_LINES: list[str] = []

MODELS = [Sphere(1), Sphere(2), Sphere(7), RealProjective(2), RealProjective(5), ComplexProjective(1), ComplexProjective(3)]


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
