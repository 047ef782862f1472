import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("dfrelay", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dfrelay")

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number): acceptance criterion number")


@pytest.fixture
def report(request):
    """Attach a one-line measurement to the acceptance summary."""
    def note(text):
        request.node.user_properties.append(("detail", text))
    return note


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number = dict(report.user_properties).get("criterion")
    if number is None:
        return
    detail = "; ".join(v for k, v in report.user_properties if k == "detail")
    _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", detail,
                           getattr(report, "duration", 0.0))


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, detail, duration = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status} ({duration:.1f} s) {detail}")


@pytest.fixture(scope="session")
def threads():
    return int(os.environ.get("DFRELAY_THREADS", "2"))
