"""Collects acceptance verdicts and prints one line per criterion."""

ACCEPTANCE = {}


def record(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail}")
