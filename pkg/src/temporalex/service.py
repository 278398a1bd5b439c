"""HTTP facade over the retrieval engine.

Every endpoint calls the exact same functions the command line does, so
the two surfaces return identical results for identical inputs.
"""

from __future__ import annotations

import datetime
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .analyzer import AnalysisError
from .corpus import CorpusIndex, effective_at
from .retrieval import RetrievalEngine


class RetrieveRequest(BaseModel):
    query: str = Field(min_length=1)
    time_hint: Optional[list[list[str]]] = None
    k: Optional[int] = Field(default=None, ge=1)


class AnalyzeRequest(BaseModel):
    query: str = Field(min_length=1)


def create_app(engine: RetrievalEngine) -> FastAPI:
    app = FastAPI(title="temporalex", version="0.1.0")
    index: CorpusIndex = engine.index

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "provisions": len(index)}

    @app.post("/retrieve")
    def retrieve_endpoint(request: RetrieveRequest) -> dict:
        try:
            hint = [tuple(pair) for pair in request.time_hint] if request.time_hint else None
            hits = engine.retrieve(request.query, time_hint=hint, top_k=request.k)
        except (AnalysisError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {"hits": [hit.to_dict() for hit in hits]}

    @app.post("/analyze")
    def analyze_endpoint(request: AnalyzeRequest) -> dict:
        try:
            return engine.analyze(request.query).to_dict()
        except AnalysisError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    @app.get("/provision/{statute_id}/{article_label}")
    def provision_endpoint(
        statute_id: str,
        article_label: str,
        date: str = Query(description="point-in-time lookup date, YYYY-MM-DD"),
    ) -> dict:
        try:
            day = datetime.date.fromisoformat(date)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"bad date: {exc}") from None
        version = effective_at(index, statute_id, article_label, day)
        if version is None:
            return {"provision": None}
        return {"provision": version.to_record()}

    return app
