import pytest

from almostaction import kernels

RESULTS = {}


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run the test once per available kernel backend."""
    before = kernels.BACKEND
    kernels.use(request.param)
    yield request.param
    kernels.use(before)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        RESULTS[mark.args[0]] = (mark.args[1], "PASS" if rep.passed else "FAIL")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        title, verdict = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {verdict}  {title}")
