"""Shared fixtures and the acceptance summary.

Tests marked ``@pytest.mark.acceptance(number, title)`` are tracked by
criterion; after the run one line per criterion is printed with its
outcome and any notes the test attached through the ``notes`` fixture.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
GOLDEN_DIR = TESTS_DIR / "data" / "golden"
N_CRITERIA = 12

sys.path.insert(0, str(TESTS_DIR))

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")
    config.addinivalue_line("markers", "slow: long-running statistical check")


@pytest.fixture
def notes(request) -> list:
    """Free-text findings that the acceptance summary prints next to the outcome."""
    found: list = []
    request.node._acceptance_notes = found
    return found


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _RESULTS[number] = {"status": status, "title": title,
                            "notes": list(getattr(item, "_acceptance_notes", [])),
                            "seconds": getattr(report, "duration", 0.0)}


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, N_CRITERIA + 1):
        res = _RESULTS.get(number)
        if res is None:
            terminalreporter.write_line(f"ACCEPTANCE {number:2d} NOT RUN")
            continue
        line = f"ACCEPTANCE {number:2d} {res['status']:4s} {res['title']} ({res['seconds']:.1f} s)"
        if res["notes"]:
            line += " :: " + "; ".join(res["notes"])
        terminalreporter.write_line(line)
