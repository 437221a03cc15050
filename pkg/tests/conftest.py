"""Shared fixtures.

Every ``MarginalApprox`` built while the suite runs is recorded so the
normalization sweep in ``test_acceptance.py`` can check all of them.  That
sweep is moved to the end of the session.
"""
import numpy as np
import pytest

from ldsmarg.marginal import MarginalApprox

PRODUCED: list = []
_original_init = MarginalApprox.__init__


def _recording_init(self, *args, **kwargs):
    _original_init(self, *args, **kwargs)
    PRODUCED.append(self)


MarginalApprox.__init__ = _recording_init

SWEEP_NAME = "test_normalization_sweep_and_gauge"


def pytest_collection_modifyitems(config, items):
    last = [it for it in items if it.name == SWEEP_NAME]
    items[:] = [it for it in items if it.name != SWEEP_NAME] + last


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
