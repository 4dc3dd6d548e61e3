import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rank1lab.ambient import make_space, point_algebra

settings.register_profile("lab", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")

ALL_SPACES = [("C", 1, 2), ("C", -1, 3), ("H", 1, 2), ("H", -1, 3), ("O", 1, 2), ("O", -1, 2)]


@pytest.fixture(params=ALL_SPACES, ids=lambda p: f"{p[0]}{'P' if p[1] > 0 else 'H'}{p[2]}")
def space_pa(request):
    sp = make_space(*request.param)
    return sp, point_algebra(sp)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
