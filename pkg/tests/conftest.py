import time
from contextlib import contextmanager

import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """``with criterion(3, "title", budget_s) as note:`` records one PASS/FAIL line.

    The block fails on any assertion error or if it exceeds its runtime budget;
    ``note(text)`` attaches measured values to the line.
    """
    log = request.config.stash[_ACCEPTANCE]

    @contextmanager
    def run(num, title, budget_s):
        details = []
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield details.append
            elapsed = time.perf_counter() - t0
            assert elapsed < budget_s, f"runtime {elapsed:.1f}s exceeds {budget_s}s"
            status = "PASS"
        except AssertionError as exc:
            details.append(str(exc).splitlines()[0])
            raise
        finally:
            elapsed = time.perf_counter() - t0
            line = f"criterion {num:2d} {status}  {title} [{elapsed:.2f}s] " + "; ".join(details)
            log[num] = line
            print(line)

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, {})
    if log:
        terminalreporter.section("acceptance criteria")
        for num in sorted(log):
            terminalreporter.write_line(log[num])
