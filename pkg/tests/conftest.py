import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One summary line per acceptance criterion, printed after the run.

_CRITERIA = []


@pytest.fixture
def note(request):
    """Attach a short measurement string to the current test's summary line."""
    def add(text):
        request.node.user_properties.append(("note", text))
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        notes = "; ".join(v for k, v in item.user_properties if k == "note")
        _CRITERIA.append((crit.args[0], crit.args[1], rep.outcome, rep.duration, notes))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, outcome, dur, notes in sorted(_CRITERIA):
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] criterion {num:2d}: {title} ({dur:.1f} s)"
        terminalreporter.write_line(line + (f" | {notes}" if notes else ""))
