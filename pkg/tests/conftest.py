"""Shared fixtures and the acceptance-criteria summary hook."""

import numpy as np
import pytest

from mftx import (DEFAULTS, QuadraturePolicy, SeriesPolicy, solve_eigenvalues)

_CRITERION_LINES = []


@pytest.fixture(scope="session")
def defaults():
    return DEFAULTS


@pytest.fixture(scope="session")
def spectrum(defaults):
    return solve_eigenvalues(defaults, 200)


@pytest.fixture(scope="session")
def series_policy():
    return SeriesPolicy()


@pytest.fixture(scope="session")
def quad_policy():
    return QuadraturePolicy()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def criterion():
    """Recorder for acceptance results; one line per criterion at the end.

    Record before asserting so a failing criterion still reports its
    measured numbers in the summary.
    """
    def _record(number, passed, detail=""):
        _CRITERION_LINES.append((number, bool(passed), detail))
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERION_LINES):
        flag = "PASS" if passed else "FAIL"
        line = f"[{flag}] criterion {number}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
