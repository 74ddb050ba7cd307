import numpy as np
import pytest

from cardioradar import radar, synth

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def config():
    return radar.RadarConfig()


@pytest.fixture(scope="session")
def capture20():
    """20 s synthetic capture at the default noise level."""
    return synth.make_capture(duration=20.0, seed=11)


@pytest.fixture(scope="session")
def processed20(capture20):
    return radar.process_capture(capture20.cube)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
