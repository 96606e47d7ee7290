import sys

import pytest

from tableforge.llm import MockChatProvider
from tableforge.tables import Table


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line acceptance results after the test run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance results")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def text_table() -> Table:
    """All-text 4-column table; removal and edit eligible."""
    return Table(
        id="text-1",
        title="Olympic Games",
        description="Host cities of recent games",
        column_names=("Year Name", "Host", "Country", "Continent"),
        rows=(
            ("Two Thousand", "Sydney", "Australia", "Oceania"),
            ("Two Thousand Four", "Athens", "Greece", "Europe"),
            ("Two Thousand Eight", "Beijing", "China", "Asia"),
        ),
    )


@pytest.fixture
def numeric_table() -> Table:
    """Table with one numeric column; calculation eligible."""
    return Table(
        id="num-1",
        title="Player Scores",
        description="Season scores per player",
        column_names=("Player", "Score", "Team"),
        rows=(
            ("alice", "12", "red"),
            ("bob", "7", "blue"),
            ("carol", "31", "red"),
            ("dave", "25", "blue"),
        ),
    )


@pytest.fixture
def two_col_text_table() -> Table:
    return Table(
        id="text-2",
        title="Capitals",
        description="",
        column_names=("Country", "Capital"),
        rows=(("France", "Paris"), ("Ghana", "Accra")),
    )


@pytest.fixture
def mock_provider() -> MockChatProvider:
    return MockChatProvider(seed=0)
