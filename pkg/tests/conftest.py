import os

import pytest
from hypothesis import HealthCheck, settings

from dircount.fixtures import fixture_names, load_fixture
from dircount.graph import base_graph

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

UNLABELLED = [n for n in fixture_names() if n != "fibonacci_labelled"]


@pytest.fixture
def fib():
    return load_fixture("fibonacci")


@pytest.fixture
def fib_labelled():
    return load_fixture("fibonacci_labelled")


@pytest.fixture
def bipartite():
    return load_fixture("bipartite_p2")


@pytest.fixture(params=fixture_names())
def any_fixture(request):
    return base_graph(load_fixture(request.param))


CRITERIA_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for the acceptance summary."""
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        CRITERIA_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)
