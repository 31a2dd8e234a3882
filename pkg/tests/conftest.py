import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "ok": True, "details": []})
    entry["ok"] &= report.passed
    if report.when == "call":
        entry["details"] += [v for k, v in item.user_properties if k == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        r = _results[number]
        detail = "; ".join(r["details"])
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if r['ok'] else 'FAIL'}  {r['title']}" + (f"  [{detail}]" if detail else "")
        )
