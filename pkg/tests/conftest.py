import json
from pathlib import Path

import pytest

from semcom import toolbox as tb
from semcom.dataset import load_dataset
from semcom.orchestrator import FIXTURE_DIR, Transmitter

STOPPED_SPAN = (200, 449)  # c01 vehicle stopped, see semcom.synth


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def clips(fixture_dir):
    return load_dataset(fixture_dir)


@pytest.fixture(scope="session")
def raw_clips(fixture_dir):
    """Fixture documents as plain JSON, for oracles that bypass the loader."""
    return {p.stem: json.loads(p.read_text()) for p in sorted(fixture_dir.glob("*.json"))}


@pytest.fixture(scope="session")
def tools():
    return tb.registry()


@pytest.fixture
def transmitter(clips):
    return Transmitter(clips)


# name -> (passed, seconds, note); filled by test_acceptance
ACCEPTANCE: dict[str, tuple[bool, float, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, seconds, note) in ACCEPTANCE.items():
        line = f"{'PASS' if passed else 'FAIL'}  {name}  ({seconds:.2f}s)"
        if note:
            line += f"  {note}"
        terminalreporter.write_line(line)
