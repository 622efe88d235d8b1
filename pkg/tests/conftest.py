import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    # acceptance criteria print one verdict line each; show them even without -s
    try:
        from test_acceptance import RESULTS
    except ImportError:  # pragma: no cover
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
