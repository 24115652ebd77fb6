ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, passed: bool | None, detail: str) -> str:
    """Store one summary line; ``passed=None`` means the check could not run."""
    status = "NOT RUN" if passed is None else ("PASS" if passed else "FAIL")
    line = f"criterion {number:>2}: {status:7s} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
