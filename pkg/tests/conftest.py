import pytest

_ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def accept():
    """Record one acceptance criterion outcome; the summary prints at session end."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((number, title, bool(passed), detail))
        print(f"ACCEPTANCE #{number:02d} {'PASS' if passed else 'FAIL'} {title} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"#{number:02d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")
