import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

import pytest  # noqa: E402

# criterion -> {part: (ok, detail)}
_CRITERIA: dict = {}


@pytest.fixture
def record_criterion():
    def record(criterion: int, ok: bool, detail: str = "", part: str = "") -> None:
        _CRITERIA.setdefault(criterion, {})[part] = (bool(ok), detail)
        print(f"criterion {criterion}{' ' + part if part else ''}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(_CRITERIA):
        parts = _CRITERIA[c]
        ok = all(v[0] for v in parts.values())
        detail = "; ".join(f"{p + ': ' if p else ''}{'ok' if v[0] else 'FAIL'} {v[1]}".strip() for p, v in sorted(parts.items()))
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
