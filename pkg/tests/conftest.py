import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qpd_sim import pulses, qdyn

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture(scope="session")
def params():
    return qdyn.TransmonParams()


@pytest.fixture(scope="session")
def mw(params):
    return pulses.MicrowavePulse(eta=params.eta)


@pytest.fixture(scope="session")
def gate():
    return pulses.GatePulseNetZero.build()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``ACCEPTANCE n PASS/FAIL`` line; the lines are repeated in
    the terminal summary so they survive output capture."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number, title, ok, detail):
        line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
