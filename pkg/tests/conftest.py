import pytest

# criterion label -> (passed, detail); filled by the ``criterion`` fixture
ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, f"rep_{rep.when}", rep)


class Criterion:
    def __init__(self, label):
        self.label = label
        self.failures = []
        self.notes = []

    def expect(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok

    def note(self, message):
        self.notes.append(message)


@pytest.fixture
def criterion(request):
    label = request.node.get_closest_marker("criterion").args[0]
    crit = Criterion(label)
    yield crit
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed and not crit.failures
    detail = "; ".join(crit.failures[:3] or crit.notes)
    if rep is not None and rep.failed and not crit.failures:
        detail = f"error: {rep.longrepr.reprcrash.message}" if hasattr(rep.longrepr, "reprcrash") else "error"
    ACCEPTANCE[label] = (passed, detail)
    print(f"\n{label}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{label}: {'PASS' if passed else 'FAIL'}  {detail}")
