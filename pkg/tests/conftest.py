import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from toricquant import MAGeodesicToric, SymplecticPotential

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def uG():
    return SymplecticPotential.fubini_study()


@pytest.fixture(scope="session")
def families(uG):
    """The three test families sharing the Fubini-Study start point."""
    return {
        "translation": MAGeodesicToric.from_difference(uG, [0.7]),
        "linear": MAGeodesicToric.from_difference(uG, [0.0, 1.0]),
        "nonlinear": MAGeodesicToric.from_difference(uG, [0.0, 0.0, 0.5]),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """record(n, ok, detail) stores one summary line per acceptance criterion."""

    def record(n, ok, detail):
        ACCEPTANCE_LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[n])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
