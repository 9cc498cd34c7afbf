import numpy as np
import pytest

from dgint.core import LinearGradientSystem, ScalarField, StructureClass, StructureMatrixField, VectorField

J = np.array([[0.0, 1.0], [-1.0, 0.0]])

ACCEPTANCE_LINES = []


def harmonic_oscillator() -> LinearGradientSystem:
    V = ScalarField(2, lambda x: 0.5 * float(x @ x), lambda x: np.array(x, dtype=float))
    L = StructureMatrixField(2, lambda x: J, StructureClass.ANTISYMMETRIC)
    f = VectorField(2, lambda x: np.array([x[1], -x[0]]))
    return LinearGradientSystem(2, L, V, f, name="harmonic")


def cayley(x, tau):
    """Closed-form discrete-gradient step of the harmonic oscillator."""
    x1, x2 = x
    d = 4 + tau ** 2
    return np.array([((4 - tau ** 2) * x1 + 4 * tau * x2) / d, (-4 * tau * x1 + (4 - tau ** 2) * x2) / d])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def oscillator():
    return harmonic_oscillator()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
