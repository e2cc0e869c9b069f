"""Shared test plumbing.

The acceptance suite registers one verdict per numbered criterion; the
terminal-summary hook prints them after the run so they are visible even
under pytest's output capture.
"""

import contextlib

CRITERION_RESULTS = []


@contextlib.contextmanager
def criterion(num, desc):
    try:
        yield
    except BaseException:
        CRITERION_RESULTS.append(f"criterion {num:02d}: FAIL - {desc}")
        raise
    CRITERION_RESULTS.append(f"criterion {num:02d}: PASS - {desc}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERION_RESULTS):
        terminalreporter.write_line(line)
