"""The HTTP facade, exercised through the in-process test client."""

import pytest
from fastapi.testclient import TestClient

from temporalex import create_app


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


def test_health_reports_corpus_size(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "provisions": 12}


def test_retrieve_honors_query_dates(client):
    response = client.post("/retrieve", json={
        "query": "2010 probation conditions Article 74",
    })
    assert response.status_code == 200
    hits = response.json()["hits"]
    assert hits[0]["provision_id"] == "criminal_law/Article 74@2009"
    assert hits[0]["t_to"] == "2011-04-30"


def test_retrieve_accepts_a_time_hint(client):
    response = client.post("/retrieve", json={
        "query": "probation conditions Article 74",
        "time_hint": [["2024-01-01", "2024-12-31"]],
    })
    assert response.json()["hits"][0]["provision_id"] == "criminal_law/Article 74@2023"


def test_retrieve_k_truncates(client):
    response = client.post("/retrieve", json={"query": "theft", "k": 1})
    assert len(response.json()["hits"]) == 1


def test_retrieve_rejects_inverted_hints(client):
    response = client.post("/retrieve", json={
        "query": "probation",
        "time_hint": [["2024-01-01", "2020-01-01"]],
    })
    assert response.status_code == 400
    assert "starts after it ends" in response.json()["detail"]


@pytest.mark.parametrize("body", [
    {"query": ""},
    {"query": "x", "k": 0},
    {},
])
def test_retrieve_validates_the_body(client, body):
    assert client.post("/retrieve", json=body).status_code == 422


def test_analyze_endpoint(client):
    response = client.post("/analyze", json={
        "query": "It is 2010. Recite Article 74 of the criminal law.",
    })
    assert response.status_code == 200
    payload = response.json()
    assert payload["time_info"] == [["2010-01-01", "2010-12-31"]]
    assert payload["chapter_info"] == ["Article 74"]


def test_analyze_rejects_whitespace_only_queries(client):
    response = client.post("/analyze", json={"query": "   "})
    assert response.status_code == 400
    assert "empty" in response.json()["detail"]


def test_provision_point_in_time_lookup(client):
    response = client.get("/provision/criminal_law/Article 74", params={"date": "2010-06-01"})
    assert response.status_code == 200
    record = response.json()["provision"]
    assert record["version_id"] == "2009"
    assert record["t_from"] == "2009-02-28"


def test_provision_lookup_in_a_coverage_gap(client):
    response = client.get("/provision/criminal_law/Article 74", params={"date": "2015-01-01"})
    assert response.status_code == 200
    assert response.json() == {"provision": None}


def test_provision_lookup_unknown_article(client):
    response = client.get("/provision/criminal_law/Article 999", params={"date": "2010-01-01"})
    assert response.json() == {"provision": None}


def test_provision_rejects_malformed_dates(client):
    response = client.get("/provision/criminal_law/Article 74", params={"date": "June 2010"})
    assert response.status_code == 400
    assert response.json()["detail"].startswith("bad date:")


def test_provision_requires_the_date_parameter(client):
    assert client.get("/provision/criminal_law/Article 74").status_code == 422
