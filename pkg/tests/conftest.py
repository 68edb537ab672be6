import numpy as np
import pytest

from fockbridge.dynamics import HamiltonianSpec
from fockbridge.parsing import parse_phipi

HARMONIC = "(phi[1]^2 + pi[1]^2)/2"
QUARTIC = "(phi[1]^2 + pi[1]^2)/2 + 1/10*phi[1]^4"


@pytest.fixture
def harmonic():
    return HamiltonianSpec(parse_phipi(HARMONIC))


@pytest.fixture
def quartic():
    return HamiltonianSpec(parse_phipi(QUARTIC))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


# One line per acceptance criterion, printed after the run whatever the -s/-q flags.
_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
