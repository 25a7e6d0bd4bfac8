from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from helpers import karate

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")

_criteria: dict[int, dict] = {}


@pytest.fixture(scope="session")
def karate_graph():
    return karate()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number = marker.args[0]
    entry = _criteria.setdefault(number, {"desc": marker.args[1], "passed": True, "ran": False})
    if report.when == "call" and not report.skipped:
        entry["ran"] = True
    if report.failed:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        if not entry["ran"]:
            status = "SKIP"
        else:
            status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"CRITERION {number}: {status}  {entry['desc']}")
