import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one ``AC<n> PASS/FAIL ...`` line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(tag: str, ok: bool, detail: str) -> bool:
        line = f"{tag} {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
