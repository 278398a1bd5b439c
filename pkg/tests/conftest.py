"""Shared fixtures: the statute corpus, fixture-backed tools, offline guard."""

import socket
from pathlib import Path

import pytest

from temporalex import RetrievalConfig, RetrievalEngine, ingest_corpus, load_items
from temporalex.tools import FixturePageSource, FixtureSearchClient, ToolRegistry

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session", autouse=True)
def no_network():
    """The suite runs offline; an attempted connection is a test bug."""
    original = socket.socket.connect

    def guard(self, *args, **kwargs):
        raise AssertionError(f"network connection attempted: {args}")

    socket.socket.connect = guard
    yield
    socket.socket.connect = original


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def statutes_path() -> Path:
    return FIXTURES / "statutes.jsonl"


@pytest.fixture(scope="session")
def items_path() -> Path:
    return FIXTURES / "bench_items.jsonl"


@pytest.fixture(scope="session")
def corpus_index(statutes_path):
    return ingest_corpus(statutes_path)


@pytest.fixture
def engine(corpus_index):
    return RetrievalEngine(corpus_index, RetrievalConfig())


@pytest.fixture
def bench_items(items_path):
    return load_items(items_path)


@pytest.fixture
def registry(engine):
    return ToolRegistry(
        search_client=FixtureSearchClient.from_file(FIXTURES / "web_results.json"),
        page_source=FixturePageSource.from_file(FIXTURES / "web_pages.json"),
        engine=engine,
    )
