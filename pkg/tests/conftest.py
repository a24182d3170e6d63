import numpy as np
import pytest

from ccrec.data import Record


def make_record(user, delta, gamma, f=(), profiles=None, start=1_000_000):
    """Index-space record; ``profiles`` gives per-group [[bucket, count], ...]."""
    groups = []
    for i, c in enumerate(delta):
        prof = profiles[i] if profiles is not None else [[c % 4, 1]]
        groups.append({"category": int(c), "window_start": start + 10 * 86400 * i,
                       "profile_nonzeros": prof})
    return Record(user, list(f), list(delta), groups, sorted(gamma))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


def record_criterion(number, title, passed, detail):
    """Store one acceptance verdict; ``passed=None`` marks a skipped criterion."""
    verdict = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    line = f"criterion {number}: {verdict}  {title}  ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
