import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results = {}


@pytest.fixture(autouse=True)
def _acceptance_budget(request):
    """Time acceptance tests and fail any that overrun their runtime budget."""
    marker = request.node.get_closest_marker("acceptance")
    if marker is None:
        yield
        return
    number, title, budget = marker.args
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    request.node.user_properties.append(("elapsed", elapsed))
    assert elapsed < budget, f"criterion {number} took {elapsed:.2f}s, budget {budget}s"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title, budget = marker.args
    entry = _results.setdefault(number, {"title": title, "budget": budget, "ok": True, "elapsed": None})
    if rep.failed:
        entry["ok"] = False
    if rep.when == "teardown":
        entry["elapsed"] = dict(item.user_properties).get("elapsed")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        e = _results[number]
        took = "n/a" if e["elapsed"] is None else f"{e['elapsed']:.2f}s"
        verdict = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {number:>2}. {e['title']} ({took}, budget {e['budget']}s)")
