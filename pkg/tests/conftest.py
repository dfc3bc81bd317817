import time

import pytest

SESSION_START = time.perf_counter()
CRITERIA = range(1, 13)
_results: dict[int, tuple[bool, str]] = {}
_touched = False


@pytest.fixture
def record_criterion():
    """``record(number, ok, detail)`` stores one acceptance verdict for the summary."""
    global _touched
    _touched = True

    def record(number: int, ok: bool, detail: str = "") -> None:
        _results[number] = (bool(ok), detail)

    return record


@pytest.fixture
def session_elapsed():
    return lambda: time.perf_counter() - SESSION_START


def pytest_collection_modifyitems(session, config, items):
    # the wall-clock criterion has to see every other test finish first
    last = [it for it in items if it.get_closest_marker("session_last")]
    items[:] = [it for it in items if not it.get_closest_marker("session_last")] + last


def pytest_configure(config):
    config.addinivalue_line("markers", "session_last: run after every other collected test")


def pytest_terminal_summary(terminalreporter):
    if not _touched:
        return
    terminalreporter.section("acceptance criteria")
    for k in CRITERIA:
        ok, detail = _results.get(k, (False, "no verdict recorded"))
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
