import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_report  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not acceptance_report.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance_report.LINES):
        terminalreporter.write_line(line)
    for block in acceptance_report.DETAILS:
        terminalreporter.write_line("")
        terminalreporter.write_line(block)
