import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("hapticsim", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("hapticsim")

# criterion number -> [title, passed, seconds]
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        number, title = mark.args
        entry = _CRITERIA.setdefault(number, [title, True, 0.0])
        entry[1] = entry[1] and rep.passed
        entry[2] += rep.duration


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, seconds = _CRITERIA[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({title}): {verdict} [{seconds:.1f} s]")
