import pytest

CRITERIA: dict = {}


class Criterion:
    """Collects the checks of one acceptance criterion and reports a single line."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.details: list[str] = []
        self.failed: list[str] = []

    def check(self, ok: bool, detail: str) -> None:
        self.details.append(detail)
        if not ok:
            self.failed.append(detail)

    def verdict(self) -> None:
        assert not self.failed, self.line

    @property
    def line(self) -> str:
        status = "PASS" if not self.failed else "FAIL"
        shown = self.failed or self.details
        return f"criterion {self.number:2d} {status}  {self.title}: " + "; ".join(shown)


@pytest.fixture
def criterion(request, capsys):
    made = []

    def make(number: int, title: str) -> Criterion:
        c = Criterion(number, title)
        made.append(c)
        CRITERIA[number] = c
        return c

    yield make
    for c in made:
        if getattr(request.node, "rep_call_failed", False) and not c.failed:
            c.failed.append("raised before completing")
        with capsys.disabled():
            print("\n" + c.line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call_failed = rep.failed


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number].line)
