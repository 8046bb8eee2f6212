import sys
from pathlib import Path

import pytest

from manchu_ocr.script import default_table
from manchu_ocr.synth import demo_atlas, demo_atlases, load_lexicon

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(FIXTURES))


@pytest.fixture(scope="session")
def table():
    return default_table()


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def atlas():
    return demo_atlas("demo-a")


@pytest.fixture(scope="session")
def atlases():
    return demo_atlases()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
