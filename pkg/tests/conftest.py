from __future__ import annotations

import sys
from pathlib import Path

import pytest

from szzkit.fixture import build_fixture_text

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / f"{name}.fixture").read_text(encoding="utf-8")


@pytest.fixture
def build(tmp_path):
    """Build a named fixture (or raw script text) into a fresh directory."""
    counter = iter(range(10_000))

    def _build(name_or_text: str):
        text = name_or_text if "@commit" in name_or_text else fixture_text(name_or_text)
        return build_fixture_text(text, tmp_path / f"repo{next(counter)}")

    return _build


@pytest.fixture
def opened(build):
    """Build a fixture and open it; handles are closed at teardown."""
    handles = []

    def _open(name_or_text: str):
        fmap = build(name_or_text)
        repo = fmap.open()
        handles.append(repo)
        return fmap, repo

    yield _open
    for h in handles:
        h.close()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
