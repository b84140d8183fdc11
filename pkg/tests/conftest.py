from __future__ import annotations

import pytest

from rwtc.model import REFERENCE_ENV
from rwtc.schema import bundled_hadoop_schema

_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    failed = rep.failed
    if rep.when == "call" or failed:
        prev = _RESULTS.get(n)
        status = "FAIL" if failed or (prev and prev[0] == "FAIL") else "PASS"
        _RESULTS[n] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, title = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")


@pytest.fixture(scope="session")
def schema():
    return bundled_hadoop_schema()


@pytest.fixture(scope="session")
def env():
    return REFERENCE_ENV
