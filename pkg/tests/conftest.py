import json
from pathlib import Path

import pytest

from weakmoments.quadrature import QuadratureConfig

DATA = Path(__file__).parent / "data"

# tolerances used where results are compared against 50-digit references
TIGHT = QuadratureConfig(abs_tol=1e-14, rel_tol=1e-13)


@pytest.fixture(scope="session")
def oracles():
    raw = json.loads((DATA / "oracles.json").read_text())["values"]

    def conv(v):
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, list):
            return [conv(x) for x in v]
        return float(v) if isinstance(v, str) else v

    return conv(raw)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
