import json
from pathlib import Path

import pytest

from disastermon.articles import ArticleKey
from disastermon.wikiclient import FixtureWikiClient

FIXTURES = Path(__file__).parent / "fixtures"
FIG1_DIR = FIXTURES / "wiki_fig1"
SEED = ArticleKey("en", "Natural_disaster")


@pytest.fixture(scope="session")
def fig1_raw() -> dict:
    """Raw fixture graph as plain dicts, keyed 'lang:title' (for oracles)."""
    pages = {}
    for file in sorted(FIG1_DIR.glob("*.json")):
        doc = json.loads(file.read_text(encoding="utf-8"))
        for title, record in doc["pages"].items():
            pages[f"{doc['language']}:{title}"] = record
    return pages


@pytest.fixture()
def fig1_client() -> FixtureWikiClient:
    return FixtureWikiClient.from_dir(FIG1_DIR)
