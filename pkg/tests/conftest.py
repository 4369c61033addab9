"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_RESULTS = {}
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.fixture
def record(request):
    """Attach measured values to the current criterion's summary line."""

    def _record(key, value):
        _DETAILS.setdefault(request.node.nodeid, []).append(f"{key}={value}")

    return _record


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if call.when == "setup" and call.excinfo is not None:
        skipped = call.excinfo.errisinstance(pytest.skip.Exception)
        _RESULTS[item.nodeid] = (name, "SKIP" if skipped else "FAIL")
    elif call.when == "call":
        if call.excinfo is None:
            status = "PASS"
        elif call.excinfo.errisinstance(pytest.skip.Exception):
            status = "SKIP"
        else:
            status = "FAIL"
        _RESULTS[item.nodeid] = (name, status)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (name, status) in _RESULTS.items():
        details = ", ".join(_DETAILS.get(nodeid, []))
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{details}]" if details else ""))
