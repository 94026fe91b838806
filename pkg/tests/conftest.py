import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance_record():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(label, passed, detail):
        _ACCEPTANCE.append((label, bool(passed), detail))
        print(f"{label}: {'PASS' if passed else 'FAIL'} | {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split()[0][2:])):
        terminalreporter.write_line(f"{label}: {'PASS' if passed else 'FAIL'} | {detail}")
