import pytest

_LINES: list[str] = []


class Criterion:
    def __init__(self, label: str):
        self.label = label
        self.detail = ""

    def note(self, text: str) -> None:
        self.detail = text


@pytest.fixture
def criterion(request):
    """Records one PASS/FAIL line for an acceptance criterion."""
    c = Criterion(request.node.name)
    yield c
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    _LINES.append(f"{'PASS' if ok else 'FAIL'}  {c.label}: {c.detail}")


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
