import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from depthtrack.geometry import CameraIntrinsics

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def k100():
    return CameraIntrinsics(100.0, 100.0, 50.0, 50.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, h=64, w=64):
    return rng.random((h, w))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
