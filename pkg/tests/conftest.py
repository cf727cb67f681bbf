from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

from likert_responsiveness.ratings_model import LikertScale  # noqa: E402

FIXTURE = Path(__file__).parents[1] / "src" / "likert_responsiveness" / "data" / "fixture"
WORKED = TESTS / "data" / "worked"


@pytest.fixture
def scale4():
    return LikertScale(4)


@pytest.fixture
def fixture_dir() -> Path:
    return FIXTURE


@pytest.fixture
def worked_dir() -> Path:
    return WORKED


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
