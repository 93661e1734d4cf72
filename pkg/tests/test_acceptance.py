"""Release criteria at their stated tolerances; one PASS/FAIL line per check.

The lines are printed as each test runs and repeated in the terminal summary.
"""

import time

import pytest

from transition_response.acceptance import CHECKS, AcceptanceRun, CheckResult, format_line

LINES = []


@pytest.fixture(scope="module")
def run():
    return AcceptanceRun(seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("key", list(CHECKS))
def test_check(key, run, capsys):
    title, fn = CHECKS[key]
    t0 = time.perf_counter()
    passed, summary, _ = fn(run)
    line = format_line(CheckResult(key, title, bool(passed), summary, {},
                                   time.perf_counter() - t0))
    LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line
