import numpy as np
import pytest

from lagshadow.datagen import GroundTruthSpec, SamplerSpec, generate_dataset
from lagshadow.domain import BenchmarkSystem
from lagshadow.fields import FunctionField, MechanicalLagrangian


def free_acceleration(q):
    return np.zeros_like(q)


@pytest.fixture(scope="session")
def pendulum():
    return BenchmarkSystem("pendulum")


@pytest.fixture(scope="session")
def henon():
    return BenchmarkSystem("henon-heiles", 0.8)


@pytest.fixture(scope="session")
def free_particle():
    """``L = qdot^2 / 2`` in one dimension."""
    return MechanicalLagrangian(1, lambda q: 0.0, lambda q: np.zeros(1), lambda q: np.zeros((1, 1)))


@pytest.fixture(scope="session")
def harmonic():
    """``L = (qdot^2 - q^2) / 2``."""
    return MechanicalLagrangian(1, lambda q: 0.5 * float(q @ q), lambda q: np.asarray(q, float),
                                lambda q: np.eye(1))


@pytest.fixture(scope="session")
def constant_field():
    return FunctionField(lambda q, v: 1.0, 1)


@pytest.fixture(scope="session")
def small_pendulum_data(pendulum):
    return generate_dataset(pendulum, SamplerSpec(((-np.pi, np.pi), (-1.2, 1.2)), 40),
                            GroundTruthSpec(0.5, 6))


@pytest.fixture(scope="session")
def free_data(pendulum):
    return generate_dataset(pendulum, SamplerSpec(((-1.0, 1.0), (-1.0, 1.0)), 50),
                            GroundTruthSpec(0.1, 5), acceleration=free_acceleration)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
