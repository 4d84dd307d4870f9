import pytest

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _criteria.get(number, (text, "PASS"))[1]
        status = "FAIL" if failed or prev == "FAIL" else "PASS"
        _criteria[number] = (text, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, status = _criteria[number]
        terminalreporter.write_line(f"[{status}] {number:2d}. {text}")
