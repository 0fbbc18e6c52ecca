import itertools

import pytest

from nostra.crypto import keygen
from nostra.keys import MappingResolver
from nostra.ledger import Ledger


class StepClock:
    """Deterministic clock: starts at ``start`` and advances ``step`` seconds per call."""

    def __init__(self, start=1_700_000_000, step=1):
        self._counter = itertools.count(start, step)

    def __call__(self):
        return next(self._counter)


@pytest.fixture
def clock():
    return StepClock()


@pytest.fixture
def ledger(clock):
    return Ledger(clock=clock)


@pytest.fixture
def uni():
    return keygen(b"\x01" * 32)


@pytest.fixture
def orgs():
    return [keygen(bytes([0x10 + i]) * 32) for i in range(3)]


@pytest.fixture
def resolver(uni, orgs):
    return MappingResolver.for_keys(uni, *orgs)


def located(keypairs):
    return [(k, k.key_id.hex()) for k in keypairs]


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] AC{number} {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
