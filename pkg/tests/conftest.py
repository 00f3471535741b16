"""Shared pytest plumbing: the acceptance-criteria summary printed after a run."""

CRITERIA = {}


def record_criterion(number, description, passed, detail=""):
    """Stash one acceptance-criterion outcome for the terminal summary."""
    CRITERIA[number] = (description, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        description, passed, detail = CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d}: {status} - {description}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
