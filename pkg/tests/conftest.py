import numpy as np
import pytest

from kgspde import FrequencyLattice, NoiseStream


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def stream():
    return NoiseStream(7)


def random_field_coeffs(lattice: FrequencyLattice, rng, decay: float = 1.0) -> np.ndarray:
    c = rng.standard_normal(lattice.size) + 1j * rng.standard_normal(lattice.size)
    return c * lattice.bracket2 ** (-decay / 2)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
