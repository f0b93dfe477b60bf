import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# One line per acceptance criterion, echoed after the run so the verdicts
# survive pytest's output capture.
acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
