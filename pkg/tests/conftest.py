from pathlib import Path

import pytest

from midcurve.config import read_pairs

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
BASE_CFG = CONFIGS / "midcurve_1y1y1y.cfg"


@pytest.fixture
def write_config():
    """Write a copy of the base config with keys replaced or dropped."""

    def write(directory: Path, changes: dict | None = None, drop: set | None = None) -> Path:
        pairs = read_pairs(BASE_CFG)
        pairs["curve.file"] = str(CONFIGS / pairs["curve.file"])
        pairs.update(changes or {})
        for key in drop or ():
            pairs.pop(key, None)
        path = directory / "run.cfg"
        path.write_text("".join(f"{k} = {v}\n" for k, v in pairs.items()))
        return path

    return write


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
