"""Tool schema validation, fixture-backed clients, and the dispatcher."""

import pytest

from temporalex import (
    ContextStore,
    FixturePageSource,
    FixtureSearchClient,
    SearchResult,
    ToolRegistry,
    ToolRequest,
    browse_webpage,
    dispatch,
    validate_tool_request,
    web_search,
)
from temporalex.tools import (
    LivePageSource,
    LiveSearchClient,
    PageExtraction,
    SearchConfigError,
    VerbatimReader,
    format_hits,
    format_search_results,
)

HOMICIDE_QUERY = "2015 intentional homicide"
SENTENCING_URL = "https://example.org/homicide-sentencing"
CASES_URL = "https://example.org/homicide-cases-2015"
REVOCATION_URL = "https://example.org/probation-revocation"


def search_request(*queries):
    return ToolRequest("web_search", {"query": list(queries)})


def browse_request(*urls):
    return ToolRequest("browse_webpage", {"url_list": list(urls)})


# --- request validation -------------------------------------------------------

def test_valid_requests_pass():
    assert validate_tool_request(search_request("q")) is None
    assert validate_tool_request(browse_request("http://x")) is None
    assert validate_tool_request(ToolRequest("rag_retrieve", {"query": ["a", "b"]})) is None


def test_unknown_tool_lists_the_available_names():
    message = validate_tool_request(ToolRequest("telephone", {"query": ["x"]}))
    assert message == (
        "unknown tool 'telephone'; available tools:"
        " web_search, browse_webpage, rag_retrieve"
    )


@pytest.mark.parametrize("arguments", [
    {"queries": ["x"]},
    {"query": ["x"], "extra": 1},
    {},
])
def test_wrong_argument_names_are_rejected(arguments):
    message = validate_tool_request(ToolRequest("web_search", arguments))
    assert message == "tool 'web_search' takes exactly one argument 'query'"


@pytest.mark.parametrize("value", [[], ["ok", 3], ["ok", ""], "not a list", None])
def test_argument_values_must_be_nonempty_string_lists(value):
    message = validate_tool_request(ToolRequest("web_search", {"query": value}))
    assert message == "argument 'query' must be a non-empty list of strings"


def test_dispatch_prefixes_violations_with_error(registry):
    out = dispatch(ToolRequest("telephone", {"query": ["x"]}), registry, ContextStore())
    assert out.startswith("error: unknown tool 'telephone'")


# --- web_search ------------------------------------------------------------------

def test_search_records_results_in_the_store(registry):
    store = ContextStore()
    out = dispatch(search_request(HOMICIDE_QUERY), registry, store)
    assert f'results for "{HOMICIDE_QUERY}":' in out
    assert f"[1] Intentional homicide sentencing guide ({SENTENCING_URL})" in out
    assert store.knows_url(SENTENCING_URL)
    assert store.knows_url(CASES_URL)
    assert len(store.searches) == 1


def test_search_results_are_truncated_to_web_top_k(registry):
    registry.web_top_k = 1
    store = ContextStore()
    out = dispatch(search_request(HOMICIDE_QUERY), registry, store)
    assert CASES_URL not in out
    assert store.searched_urls == {SENTENCING_URL}


def test_unknown_query_reports_no_results(registry):
    out = dispatch(search_request("quantum torts"), registry, ContextStore())
    assert 'results for "quantum torts":\nno results' in out


def test_each_query_in_the_list_is_searched(registry):
    store = ContextStore()
    dispatch(search_request(HOMICIDE_QUERY, "probation revocation"), registry, store)
    assert [q for q, _ in store.searches] == [HOMICIDE_QUERY, "probation revocation"]


def test_stores_are_isolated_between_rollouts(registry):
    first, second = ContextStore(), ContextStore()
    dispatch(search_request(HOMICIDE_QUERY), registry, first)
    assert first.knows_url(SENTENCING_URL)
    assert not second.knows_url(SENTENCING_URL)
    assert second.searches == ()


# --- browse_webpage ------------------------------------------------------------------

def test_browsing_an_unsearched_url_is_a_policy_violation(registry):
    out = dispatch(browse_request(SENTENCING_URL), registry, ContextStore())
    assert out.startswith(f"policy violation: {SENTENCING_URL} was not returned")


def test_browse_concatenates_all_pages(registry):
    store = ContextStore()
    dispatch(search_request(HOMICIDE_QUERY), registry, store)
    out = dispatch(browse_request(SENTENCING_URL), registry, store)
    assert out.startswith(f"content from {SENTENCING_URL}:\n")
    assert "Sentencing for intentional hom" in out
    assert "Mitigating circumstances" in out
    assert "Aggravating circumstances" in out


def test_page_cap_limits_how_deep_browsing_goes(registry):
    registry.page_cap = 2
    store = ContextStore()
    dispatch(search_request(HOMICIDE_QUERY), registry, store)
    out = dispatch(browse_request(SENTENCING_URL), registry, store)
    assert "Mitigating circumstances" in out
    assert "Aggravating circumstances" not in out


def test_reader_can_stop_paging_early(registry):
    class FirstPageOnly:
        def read(self, page_text, page_index, has_next):
            return PageExtraction(page_text, page_down=False, short_summary="")

    registry.reader = FirstPageOnly()
    store = ContextStore()
    dispatch(search_request(HOMICIDE_QUERY), registry, store)
    out = dispatch(browse_request(SENTENCING_URL), registry, store)
    assert "Sentencing for intentional hom" in out
    assert "Mitigating circumstances" not in out


def test_searched_url_without_pages_reports_no_content(registry):
    store = ContextStore()
    dispatch(search_request("probation revocation"), registry, store)
    out = dispatch(browse_request(REVOCATION_URL), registry, store)
    assert out == f"no content at {REVOCATION_URL}"


def test_browse_handles_a_mixed_url_list(registry):
    store = ContextStore()
    dispatch(search_request(HOMICIDE_QUERY), registry, store)
    out = dispatch(browse_request(CASES_URL, "https://example.org/unseen"), registry, store)
    blocks = out.split("\n\n")
    assert blocks[0].startswith(f"content from {CASES_URL}:")
    assert blocks[1].startswith("policy violation: https://example.org/unseen")


# --- rag_retrieve --------------------------------------------------------------------

def test_rag_retrieve_formats_provision_hits(registry):
    out = dispatch(
        ToolRequest("rag_retrieve", {"query": ["2010 probation conditions Article 74"]}),
        registry, ContextStore(),
    )
    assert 'provisions for "2010 probation conditions Article 74":' in out
    assert (
        "[1] statute=criminal_law article=Article 74 version=2009"
        " valid=2009-02-28..2011-04-30"
    ) in out
    assert "text: Article 74." in out


def test_rag_retrieve_shows_present_for_open_windows(registry):
    out = dispatch(
        ToolRequest("rag_retrieve", {"query": ["2024 probation conditions Article 74"]}),
        registry, ContextStore(),
    )
    assert "version=2023 valid=2023-03-01..present" in out


def test_rag_retrieve_with_no_hits(registry):
    out = dispatch(ToolRequest("rag_retrieve", {"query": ["zoning 1950"]}),
                   registry, ContextStore())
    assert out == 'provisions for "zoning 1950":\nno provisions found'


def test_format_hits_with_no_hits_matches_dispatch():
    assert format_hits("q", []) == 'provisions for "q":\nno provisions found'


# --- missing backends and failures ------------------------------------------------

def test_tools_without_backends_report_unavailable(engine):
    bare = ToolRegistry()
    assert dispatch(search_request("x"), bare, ContextStore()) == (
        "error: web_search is not available in this run"
    )
    assert dispatch(browse_request("http://x"), bare, ContextStore()) == (
        "error: browse_webpage is not available in this run"
    )
    assert dispatch(ToolRequest("rag_retrieve", {"query": ["x"]}), bare, ContextStore()) == (
        "error: rag_retrieve is not available in this run"
    )


def test_live_search_without_a_key_becomes_an_error_response(monkeypatch, engine):
    monkeypatch.delenv("SEARCH_API_KEY", raising=False)
    registry = ToolRegistry(search_client=LiveSearchClient(endpoint="https://api.example/s"))
    out = dispatch(search_request("x"), registry, ContextStore())
    assert out == "error: tool 'web_search' failed: SEARCH_API_KEY is not set"


def test_live_search_requires_an_endpoint(monkeypatch):
    monkeypatch.setenv("SEARCH_API_KEY", "k")
    client = LiveSearchClient(endpoint="")
    with pytest.raises(SearchConfigError, match="endpoint"):
        client.search("x")


# --- live clients against stub sessions ------------------------------------------

class StubResponse:
    def __init__(self, payload=None, text=""):
        self._payload = payload
        self.text = text

    def raise_for_status(self):
        pass

    def json(self):
        return self._payload


class StubSession:
    def __init__(self, payload=None, text=""):
        self.payload = payload
        self.text = text
        self.calls = []

    def post(self, url, **kwargs):
        self.calls.append(("post", url, kwargs))
        return StubResponse(self.payload)

    def get(self, url, **kwargs):
        self.calls.append(("get", url, kwargs))
        return StubResponse(text=self.text)


def test_live_search_parses_organic_entries(monkeypatch):
    monkeypatch.setenv("SEARCH_API_KEY", "secret")
    session = StubSession(payload={"organic": [
        {"title": "A", "url": "https://a", "snippet": "sa"},
        {"title": "B", "link": "https://b"},
        {"title": "no url"},
    ]})
    client = LiveSearchClient(endpoint="https://api.example/s", session=session)
    results = client.search("theft")
    assert results == [
        SearchResult("A", "https://a", "sa"),
        SearchResult("B", "https://b", ""),
    ]
    method, url, kwargs = session.calls[0]
    assert (method, url) == ("post", "https://api.example/s")
    assert kwargs["json"] == {"q": "theft"}
    assert kwargs["headers"]["X-API-KEY"] == "secret"


def test_live_search_falls_back_to_results_key(monkeypatch):
    monkeypatch.setenv("SEARCH_API_KEY", "secret")
    session = StubSession(payload={"results": [{"title": "C", "url": "https://c"}]})
    client = LiveSearchClient(endpoint="https://api.example/s", session=session)
    assert [r.url for r in client.search("q")] == ["https://c"]


def test_live_page_source_chunks_fetched_text():
    session = StubSession(text="abcdefghij")
    source = LivePageSource(page_chars=4, session=session)
    assert source.pages("https://x") == ["abcd", "efgh", "ij"]


# --- readers and formatting --------------------------------------------------------

def test_verbatim_reader_copies_the_page():
    reader = VerbatimReader(summary_chars=4)
    extraction = reader.read("full page text", 0, has_next=True)
    assert extraction.extracted_info == "full page text"
    assert extraction.page_down is True
    assert extraction.short_summary == "full"
    last = reader.read("tail", 2, has_next=False)
    assert last.page_down is False


def test_format_search_results_golden():
    per_query = [
        ("q1", [SearchResult("Title", "https://t", "snip")]),
        ("q2", []),
    ]
    assert format_search_results(per_query) == (
        'results for "q1":\n'
        "[1] Title (https://t)\n"
        "    snip\n"
        "\n"
        'results for "q2":\n'
        "no results"
    )


def test_fixture_clients_load_from_files(fixtures_dir):
    client = FixtureSearchClient.from_file(fixtures_dir / "web_results.json")
    assert [r.url for r in client.search(HOMICIDE_QUERY)] == [SENTENCING_URL, CASES_URL]
    source = FixturePageSource.from_file(fixtures_dir / "web_pages.json")
    assert len(source.pages(SENTENCING_URL)) == 3
    assert source.pages("https://nowhere") == []


def test_web_search_helper_returns_per_query_pairs(registry):
    store = ContextStore()
    pairs = web_search([HOMICIDE_QUERY], registry.search_client, store, top_k=2)
    assert [(q, [r.url for r in rs]) for q, rs in pairs] == [
        (HOMICIDE_QUERY, [SENTENCING_URL, CASES_URL])
    ]


def test_browse_webpage_helper_matches_dispatch(registry):
    store = ContextStore()
    dispatch(search_request(HOMICIDE_QUERY), registry, store)
    direct = browse_webpage([CASES_URL], registry.page_source, VerbatimReader(), store)
    assert direct.startswith(f"content from {CASES_URL}:")
