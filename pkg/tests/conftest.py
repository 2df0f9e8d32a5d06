"""Shared pytest plumbing for the test suite."""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line acceptance verdicts after the run.

    The acceptance tests print their PASS/FAIL lines as they go, but
    pytest's fd-level capture swallows those for passing tests; repeating
    them here keeps the verdicts visible in plain ``pytest`` output.
    """
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
