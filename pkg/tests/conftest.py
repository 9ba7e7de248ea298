import pytest

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "passed": True, "seconds": 0.0})
    if report.when == "call":
        entry["seconds"] = report.duration
    if report.failed:
        entry["passed"] = False
        entry["reason"] = report.longreprtext.strip().splitlines()[-1] if report.longreprtext else ""


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "PASS" if e["passed"] else "FAIL"
        line = f"[{status}] {number}. {e['title']} ({e['seconds']:.2f} s)"
        if not e["passed"] and e.get("reason"):
            line += f" :: {e['reason'][:160]}"
        terminalreporter.write_line(line)
