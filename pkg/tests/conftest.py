import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> list of (part, passed, detail)
_RESULTS = {}
_EXPECTED = set()


@pytest.hookimpl(trylast=True)
def pytest_collection_modifyitems(items):
    # trylast so that -k / -m deselection has already happened
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _EXPECTED.add(mark.args[0])


@pytest.fixture
def criterion(request):
    """Record and print one acceptance result; returns ``passed`` so tests can assert on it."""
    capman = request.config.pluginmanager.getplugin("capturemanager")
    number = request.node.get_closest_marker("criterion").args[0]

    def report(passed, detail, part=None):
        passed = bool(passed)
        _RESULTS.setdefault(number, []).append((part, passed, detail))
        label = f"criterion {number}" + (f" [{part}]" if part else "")
        with capman.global_and_fixture_disabled():
            print(f"\n{label}: {'PASS' if passed else 'FAIL'}  {detail}", flush=True)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if not _EXPECTED:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_EXPECTED):
        parts = _RESULTS.get(number)
        if not parts:
            terminalreporter.write_line(f"criterion {number}: FAIL  no result recorded (test errored or skipped)")
            continue
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{part}: {d}" if part else d for part, _, d in parts)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
