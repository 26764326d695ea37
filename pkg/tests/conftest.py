import numpy as np
import pytest

from rogue_sensors.data import from_arrays, normalize
from rogue_sensors.simgen import SimConfig, generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_fleet():
    """A 12-sensor, 120-step fleet: 6 normal plus 2 of each fault type."""
    cfg = SimConfig(n_sensors=12, length=120, anomaly_mix={"normal": 6, "t1": 2, "t2": 2, "t3": 2}, seed=3)
    raw, labels = generate(cfg)
    return normalize(raw), labels


@pytest.fixture
def toy_dataset():
    vals = [[0.0, 1.0, 2.0, 3.0, 2.0], [0.5, 1.5, 2.5], [3.0, 3.0, -1.0, 0.0], [1.0, 0.0, 1.0, 0.0, 1.0, 0.0]]
    return normalize(from_arrays(vals))


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[number])
