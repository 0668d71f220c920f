"""Shared test plumbing: the acceptance summary printed at the end of a run."""
import pytest

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    props = dict(rep.user_properties)
    status = props.get("acceptance_status")
    if status is None:
        status = "pass" if rep.passed else "FAIL"
    _ACCEPTANCE[number] = (status, title, props.get("acceptance_detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[n]
        line = f"[{status.upper():4}] {n:>2}. {title}"
        tr.write_line(line + (f" -- {detail}" if detail else ""))
