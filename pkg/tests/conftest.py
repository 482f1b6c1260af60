"""Collects acceptance results and prints one line per criterion."""

import pytest

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    entry = _results.setdefault(number, {"title": title, "passed": True, "tests": 0})
    entry["tests"] += rep.when == "call"
    if rep.failed or rep.skipped:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        r = _results[number]
        status = "PASS" if r["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}  {status}  {r['title']} ({r['tests']} tests)")
