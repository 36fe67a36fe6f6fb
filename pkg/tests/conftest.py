import pytest

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    _CRITERIA[props["criterion"]] = {
        "title": props.get("title", ""),
        "passed": report.outcome == "passed",
        "detail": props.get("detail", ""),
    }


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        c = _CRITERIA[k]
        status = "PASS" if c["passed"] else "FAIL"
        terminalreporter.write_line(f"[{status}] {k:2d} {c['title']}: {c['detail']}")


@pytest.fixture
def criterion(request):
    """Tag the running test with its criterion and collect a one-line detail."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    request.node.user_properties.append(("criterion", number))
    request.node.user_properties.append(("title", title))

    def report(ok: bool, detail: str) -> bool:
        request.node.user_properties.append(("detail", detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {number:2d} {title}: {detail}")
        return ok

    return report

