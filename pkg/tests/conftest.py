from __future__ import annotations

import numpy as np
import pytest
from PIL import Image


def write_image(path, array):
    Image.fromarray(array).save(path)
    return path


@pytest.fixture
def image_dir(tmp_path):
    """Five distinct 20x12 grayscale PNGs named img0..img4."""
    rng = np.random.RandomState(99)
    for i in range(5):
        arr = rng.randint(0, 255, size=(12, 20), dtype=np.uint8)
        write_image(tmp_path / f"img{i}.png", arr)
    return tmp_path


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One visible PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::" in nodeid and getattr(report, "when", "call") == "call":
                name = nodeid.split("::", 1)[1]
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, status))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}")
