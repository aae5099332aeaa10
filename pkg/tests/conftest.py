import socket
import sys
import time

import pytest
from hypothesis import HealthCheck, settings

from roadtune import kernels

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

_real_connect = socket.socket.connect


def _blocked_connect(self, address):
    raise RuntimeError(f"network access attempted during tests: {address!r}")


@pytest.fixture(autouse=True, scope="session")
def no_network():
    # The suite must stay offline; anything reaching for a socket is a bug.
    socket.socket.connect = _blocked_connect
    try:
        yield
    finally:
        socket.socket.connect = _real_connect


@pytest.fixture(autouse=True, scope="session")
def warm_kernels():
    # Pay any jit compile cost up front so individual tests time cleanly.
    kernels.warmup()
    yield


SUITE_BUDGET_SECONDS = 300.0

# Filled by the acceptance tests; flushed as a terminal section at the end
# of the run, outside capture, so the lines always reach the real output.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True, scope="session")
def suite_deadline(request):
    # Anchored to session start so collection and jit warmup count too;
    # teardown runs after the last test, and blowing the budget turns the
    # run red.
    started = getattr(request.config, "_suite_started", None) or time.monotonic()
    yield
    elapsed = time.monotonic() - started
    ok = elapsed < SUITE_BUDGET_SECONDS
    ACCEPTANCE_LINES.append(
        f"[acceptance] full suite wall time under 5 minutes: "
        f"{'PASS' if ok else 'FAIL'} ({elapsed:.1f}s)"
    )
    assert ok, f"suite took {elapsed:.1f}s, budget {SUITE_BUDGET_SECONDS:.0f}s"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_sessionstart(session):
    session.config._suite_started = time.monotonic()


def pytest_sessionfinish(session, exitstatus):
    started = getattr(session.config, "_suite_started", None)
    if started is not None:
        elapsed = time.monotonic() - started
        print(f"\n[suite] total wall time: {elapsed:.1f}s", file=sys.__stdout__)
