"""Shared fixtures.

Expensive artefacts (calibration maps, full-size datasets, trained models,
the long noise-free closed loop) are built once per session and reused by
the unit and acceptance tests.
"""

import pytest

from softskin.actuation import PlantActuator, calibrate
from softskin.dynamics import SegmentParams
from softskin.harness import ExperimentConfig, collect, collect_test, train_estimator


@pytest.fixture(scope="session")
def default_maps():
    return calibrate(PlantActuator(), SegmentParams())


@pytest.fixture(scope="session")
def ideal_uni_low():
    """60 s noise-free closed loop with truth feedback on uni_low."""
    from softskin.control import simulate_ideal
    from softskin.trajectories import TrajectorySpec

    return simulate_ideal(SegmentParams(), TrajectorySpec("uni_low"), duration=60.0)


class Pipeline:
    """Default-config dataset, held-out run and trained model for one mode."""

    def __init__(self, mode):
        self.config = ExperimentConfig.default(mode)
        self.dataset = collect(self.config)
        self.test = collect_test(self.config)
        self.result = train_estimator(self.config, self.dataset)
        self.model = self.result.model


@pytest.fixture(scope="session")
def uni_pipeline():
    return Pipeline("uni")


@pytest.fixture(scope="session")
def bi_pipeline():
    return Pipeline("bi")


@pytest.fixture
def small_config():
    """A few seconds of data; fast enough for per-test use."""
    return ExperimentConfig.default(
        "uni", total_points=1200, n_sessions=2, test_duration=5.0, tracking_duration=3.0
    )


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """Record the verdict of one acceptance criterion.

    Call as ``criterion(n, title, passed, detail)``; the line is echoed in
    the terminal summary whether or not the test itself is captured.
    """

    def report(number, title, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {title}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
