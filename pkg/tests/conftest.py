from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN_PATH = Path(__file__).parent / "golden.json"

# criterion -> list of (part, ok, detail), filled by the acceptance tests
_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
    """Store one acceptance check; call before asserting so failures are reported too."""
    _ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    return bool(ok)


@pytest.fixture
def acceptance():
    return record


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads(GOLDEN_PATH.read_text())


def acceptance_lines() -> list[str]:
    lines = []
    for n in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[n]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name} {'ok' if good else 'FAILED'}" + (f" ({d})" if d else "")
                           for name, good, d in parts)
        lines.append(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = acceptance_lines()
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number")
