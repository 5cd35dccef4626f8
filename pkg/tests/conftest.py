"""Shared pytest hooks: the acceptance suite prints one line per criterion."""

ACCEPTANCE = {}


def record(criterion, passed, detail):
    """Store an acceptance outcome and echo it (shown with ``-s``)."""
    line = f"{criterion}: {'PASS' if passed else 'FAIL'} -- {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE[key])
