from __future__ import annotations

import pytest

_LINES: list[str] = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the terminal summary and echo it."""

    def _report(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d} {name}: {detail}"
        _LINES.append(line)
        print(line, flush=True)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
