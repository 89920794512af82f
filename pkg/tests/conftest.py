import numpy as np
import pytest

from darsim.resonator import LowPassConfig, ThresholdElementConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def comparator():
    return ThresholdElementConfig("comparator", u_th=0.5, u_h=1.0)


@pytest.fixture
def lcd():
    return ThresholdElementConfig("lcd", u_th=0.5, u_lcd=1.0, tau=0.001)


@pytest.fixture
def lpf80():
    return LowPassConfig(carrier_periods=4, f_t=80.0)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance check for the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(name: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
