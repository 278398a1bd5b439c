"""Search, browsing, and statute-retrieval tools behind a single dispatcher.

Tool clients are stateless and shareable across rollouts; everything a
rollout learns (search results, seen URLs) lives in its own append-only
ContextStore. The dispatcher never raises: schema violations, unknown
tools, and client failures all come back as plain-text tool responses
so a rollout can continue.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

import requests

from .retrieval import FusedHit, RetrievalEngine

WEB_SEARCH = "web_search"
BROWSE_WEBPAGE = "browse_webpage"
RAG_RETRIEVE = "rag_retrieve"
TOOL_NAMES = (WEB_SEARCH, BROWSE_WEBPAGE, RAG_RETRIEVE)

# Argument schema per tool: field name -> "every element is a string" list.
_TOOL_SCHEMAS: dict[str, str] = {
    WEB_SEARCH: "query",
    BROWSE_WEBPAGE: "url_list",
    RAG_RETRIEVE: "query",
}

SEARCH_API_KEY_VAR = "SEARCH_API_KEY"


@dataclass(frozen=True)
class ToolRequest:
    name: str
    arguments: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "arguments": self.arguments}


def validate_tool_request(request: ToolRequest) -> Optional[str]:
    """Schema-check a request; returns a violation message or None."""
    if request.name not in _TOOL_SCHEMAS:
        names = ", ".join(TOOL_NAMES)
        return f"unknown tool '{request.name}'; available tools: {names}"
    field_name = _TOOL_SCHEMAS[request.name]
    if set(request.arguments) != {field_name}:
        return f"tool '{request.name}' takes exactly one argument '{field_name}'"
    value = request.arguments[field_name]
    if (
        not isinstance(value, list)
        or not value
        or not all(isinstance(v, str) and v for v in value)
    ):
        return f"argument '{field_name}' must be a non-empty list of strings"
    return None


@dataclass(frozen=True)
class SearchResult:
    title: str
    url: str
    snippet: str


@dataclass
class ContextStore:
    """Per-rollout memory of search activity. Append-only by design: the
    searched-URL set is how browse_webpage enforces that URLs come from
    earlier results."""

    _searches: list[tuple[str, tuple[SearchResult, ...]]] = field(default_factory=list)

    def record_search(self, query: str, results: Sequence[SearchResult]) -> None:
        self._searches.append((query, tuple(results)))

    @property
    def searches(self) -> tuple[tuple[str, tuple[SearchResult, ...]], ...]:
        return tuple(self._searches)

    @property
    def searched_urls(self) -> set[str]:
        return {r.url for _, results in self._searches for r in results}

    def knows_url(self, url: str) -> bool:
        return url in self.searched_urls


@dataclass(frozen=True)
class PageExtraction:
    extracted_info: str
    page_down: bool
    short_summary: str


# --- search clients ---------------------------------------------------------

class SearchClient(Protocol):
    def search(self, query: str) -> list[SearchResult]: ...


class SearchConfigError(RuntimeError):
    """The live client is not configured (missing API key or endpoint)."""


@dataclass
class FixtureSearchClient:
    """Canned results keyed by exact query text; unknown queries get none."""

    results_by_query: dict[str, list[SearchResult]]

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureSearchClient":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        table = {
            query: [
                SearchResult(r["title"], r["url"], r.get("snippet", ""))
                for r in entries
            ]
            for query, entries in raw.items()
        }
        return cls(table)

    def search(self, query: str) -> list[SearchResult]:
        return list(self.results_by_query.get(query, []))


@dataclass
class LiveSearchClient:
    """HTTP search client; the key comes from the SEARCH_API_KEY variable."""

    endpoint: str
    api_key: Optional[str] = None
    timeout: float = 10.0
    session: Optional[requests.Session] = None

    def search(self, query: str) -> list[SearchResult]:
        key = self.api_key or os.environ.get(SEARCH_API_KEY_VAR)
        if not key:
            raise SearchConfigError(f"{SEARCH_API_KEY_VAR} is not set")
        if not self.endpoint:
            raise SearchConfigError("search endpoint is not configured")
        session = self.session or requests
        response = session.post(
            self.endpoint,
            json={"q": query},
            headers={"X-API-KEY": key, "Content-Type": "application/json"},
            timeout=self.timeout,
        )
        response.raise_for_status()
        payload = response.json()
        entries = payload.get("organic") or payload.get("results") or []
        results = []
        for entry in entries:
            url = entry.get("url") or entry.get("link") or ""
            if not url:
                continue
            results.append(
                SearchResult(
                    title=entry.get("title", ""),
                    url=url,
                    snippet=entry.get("snippet", ""),
                )
            )
        return results


# --- page sources and readers -------------------------------------------------

class PageSource(Protocol):
    def pages(self, url: str) -> list[str]: ...


@dataclass
class FixturePageSource:
    """Pre-paginated page text keyed by URL."""

    pages_by_url: dict[str, list[str]]

    @classmethod
    def from_file(cls, path: str | Path) -> "FixturePageSource":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({url: list(pages) for url, pages in raw.items()})

    def pages(self, url: str) -> list[str]:
        return list(self.pages_by_url.get(url, []))


@dataclass
class LivePageSource:
    """Fetch a URL once and paginate its text into fixed-size chunks."""

    page_chars: int = 4000
    timeout: float = 10.0
    session: Optional[requests.Session] = None

    def pages(self, url: str) -> list[str]:
        session = self.session or requests
        response = session.get(url, timeout=self.timeout)
        response.raise_for_status()
        text = response.text
        return [text[i : i + self.page_chars] for i in range(0, len(text), self.page_chars)]


class PageReader(Protocol):
    """Extracts the useful content of one page and decides whether to page on.

    Implementations must preserve statutory text verbatim in
    ``extracted_info``; summarization belongs in ``short_summary`` only.
    """

    def read(self, page_text: str, page_index: int, has_next: bool) -> PageExtraction: ...


@dataclass(frozen=True)
class VerbatimReader:
    """Deterministic reader: copies the page verbatim, pages while pages remain."""

    summary_chars: int = 120

    def read(self, page_text: str, page_index: int, has_next: bool) -> PageExtraction:
        return PageExtraction(
            extracted_info=page_text,
            page_down=has_next,
            short_summary=page_text[: self.summary_chars],
        )


# --- tool implementations -----------------------------------------------------

def web_search(
    queries: Sequence[str],
    client: SearchClient,
    store: ContextStore,
    top_k: int = 10,
) -> list[tuple[str, list[SearchResult]]]:
    """Run each query, record results in the store, and return them per query.

    Client failures propagate; the dispatcher turns them into an error
    response so the rollout can continue.
    """
    out: list[tuple[str, list[SearchResult]]] = []
    for query in queries:
        results = client.search(query)[:top_k]
        store.record_search(query, results)
        out.append((query, results))
    return out


def format_search_results(per_query: Sequence[tuple[str, Sequence[SearchResult]]]) -> str:
    blocks = []
    for query, results in per_query:
        lines = [f'results for "{query}":']
        if not results:
            lines.append("no results")
        for n, r in enumerate(results, start=1):
            lines.append(f"[{n}] {r.title} ({r.url})")
            if r.snippet:
                lines.append(f"    {r.snippet}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def browse_webpage(
    urls: Sequence[str],
    source: PageSource,
    reader: PageReader,
    store: ContextStore,
    page_cap: int = 5,
) -> str:
    """Page through each URL with the reader, up to page_cap pages per URL.

    URLs that never appeared in this rollout's search results are
    refused with a policy-violation message.
    """
    blocks: list[str] = []
    for url in urls:
        if not store.knows_url(url):
            blocks.append(
                f"policy violation: {url} was not returned by any earlier web_search"
                " in this rollout; browse only URLs taken from search results"
            )
            continue
        pages = source.pages(url)
        if not pages:
            blocks.append(f"no content at {url}")
            continue
        extracted: list[str] = []
        for page_index in range(min(len(pages), page_cap)):
            has_next = page_index + 1 < len(pages)
            extraction = reader.read(pages[page_index], page_index, has_next)
            extracted.append(extraction.extracted_info)
            if not extraction.page_down:
                break
        digest = "\n".join(part for part in extracted if part)
        blocks.append(f"content from {url}:\n{digest}")
    return "\n\n".join(blocks)


def format_hits(query: str, hits: Sequence[FusedHit]) -> str:
    lines = [f'provisions for "{query}":']
    if not hits:
        lines.append("no provisions found")
    for n, hit in enumerate(hits, start=1):
        p = hit.provision
        until = p.window.t_to.isoformat() if p.window.t_to else "present"
        lines.append(
            f"[{n}] statute={p.statute_id} article={p.article_label}"
            f" version={p.version_id} valid={p.window.t_from.isoformat()}..{until}"
        )
        lines.append(f"text: {p.text}")
    return "\n".join(lines)


def rag_retrieve(queries: Sequence[str], engine: RetrievalEngine) -> str:
    """Retrieve statutes for each query and format the hits as plain text."""
    return "\n\n".join(format_hits(query, engine.retrieve(query)) for query in queries)


# --- registry and dispatch ----------------------------------------------------

@dataclass
class ToolRegistry:
    """Configured tool backends shared by all rollouts of a run."""

    search_client: Optional[SearchClient] = None
    page_source: Optional[PageSource] = None
    reader: PageReader = field(default_factory=VerbatimReader)
    engine: Optional[RetrievalEngine] = None
    web_top_k: int = 10
    page_cap: int = 5


def dispatch(request: ToolRequest, registry: ToolRegistry, store: ContextStore) -> str:
    """Validate and execute a tool request, always returning response text."""
    violation = validate_tool_request(request)
    if violation:
        return f"error: {violation}"
    try:
        if request.name == WEB_SEARCH:
            if registry.search_client is None:
                return "error: web_search is not available in this run"
            per_query = web_search(
                request.arguments["query"], registry.search_client, store, registry.web_top_k
            )
            return format_search_results(per_query)
        if request.name == BROWSE_WEBPAGE:
            if registry.page_source is None:
                return "error: browse_webpage is not available in this run"
            return browse_webpage(
                request.arguments["url_list"],
                registry.page_source,
                registry.reader,
                store,
                registry.page_cap,
            )
        if registry.engine is None:
            return "error: rag_retrieve is not available in this run"
        return rag_retrieve(request.arguments["query"], registry.engine)
    except Exception as exc:
        return f"error: tool '{request.name}' failed: {exc}"
