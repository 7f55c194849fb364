import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion as passed once the test body finishes."""
    names = []

    def register(name):
        names.append(name)
        ACCEPTANCE_RESULTS[name] = ("FAIL", request.node.nodeid)

    yield register
    rep = getattr(request.node, "rep_call", None)
    if rep is not None and rep.passed:
        for name in names:
            ACCEPTANCE_RESULTS[name] = ("PASS", request.node.nodeid)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda n: int(n.split()[0][2:])):
        status, node = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{status}  {name}")
