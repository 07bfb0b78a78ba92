from pathlib import Path

import numpy as np
import pytest

from hexakine.geometry import reference_geometry, reference_geometry_path

CORPUS = Path(__file__).parent / "corpus"

# half-widths of the random-pose box around home: metres, then radians
WORKSPACE_BOX = np.array([0.03, 0.03, 0.03, 0.08, 0.08, 0.08])

_acceptance_lines: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    _acceptance_lines.append(f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def geom():
    return reference_geometry()


@pytest.fixture(scope="session")
def geom_path():
    return reference_geometry_path()


@pytest.fixture(scope="session")
def corpus_programs():
    return sorted(CORPUS.glob("*.gcode"))


def random_poses(geom, n, seed):
    rng = np.random.default_rng(seed)
    return geom.home_pose.as_array() + rng.uniform(-1.0, 1.0, (n, 6)) * WORKSPACE_BOX
