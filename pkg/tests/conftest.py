"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_OUTCOMES: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if report.when == "call" or report.failed:
        num = int(marker.args[0])
        entry = _OUTCOMES.setdefault(num, {"title": marker.kwargs.get("title", ""), "ok": True, "notes": []})
        if report.failed:
            entry["ok"] = False
            entry["notes"].append(item.name)
        for name, content in report.user_properties:
            if name == "detail":
                entry["notes"].append(str(content))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_OUTCOMES):
        e = _OUTCOMES[num]
        status = "PASS" if e["ok"] else "FAIL"
        line = f"criterion {num}: {status}  {e['title']}"
        if e["notes"]:
            line += "  [" + "; ".join(e["notes"]) + "]"
        terminalreporter.write_line(line)
