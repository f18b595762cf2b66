"""Shared pytest plumbing.

The release gate in test_acceptance.py names its tests
test_criterion_<n>_*; their outcomes are collected here and echoed as
one `[criterion n] PASS/FAIL` line each in the terminal summary, so
the gate's verdict is visible without digging through the dots.
"""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_results = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    match = _CRITERION.search(report.nodeid)
    if match:
        _results[int(match.group(1))] = report.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        terminalreporter.write_line(f"[criterion {n}] {'PASS' if _results[n] else 'FAIL'}")
