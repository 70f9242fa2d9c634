import sys

from hypothesis import HealthCheck, settings

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

import contextlib
import time

import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


class _Verdict:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def criterion(request):
    results = request.config.stash[_RESULTS]

    @contextlib.contextmanager
    def record(number: int, title: str):
        verdict = _Verdict()
        start = time.perf_counter()
        status, why = "FAIL", ""
        try:
            yield verdict
            status = "PASS"
        except BaseException as exc:
            why = f" [{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}]"
            raise
        finally:
            line = f"criterion {number:>2} {status}  {title}: {verdict.detail}{why} ({time.perf_counter() - start:.1f}s)"
            results.append((number, line))
            print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results):
            terminalreporter.write_line(line)
