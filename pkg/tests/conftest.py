"""Collects the acceptance verdicts and prints them after the run."""

import time
from contextlib import contextmanager

import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    results = request.config.stash[_RESULTS]

    @contextmanager
    def check(number, title):
        start = time.perf_counter()
        verdict, detail = "FAIL", ""
        try:
            yield
            verdict = "PASS"
        except pytest.skip.Exception as exc:
            verdict, detail = "SKIP", str(exc)
            raise
        except BaseException as exc:
            detail = f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            raise
        finally:
            line = f"criterion {number:>2} {verdict}  {title} ({time.perf_counter() - start:.2f}s)"
            if detail:
                line += f"  [{detail}]"
            results.append((number, line))
            print(line)

    return check


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(results):
        terminalreporter.write_line(line)
