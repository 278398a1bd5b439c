"""Hybrid statute retrieval: temporal filtering plus rank fusion.

Three channels score the temporally filtered candidates: a keyword
channel driven by the query analysis, a dense channel over n-gram
embeddings, and a sparse BM25 channel. Channel rankings are merged with
weighted reciprocal-rank fusion; every step is deterministic, and ties
always break toward the lexicographically smaller provision id.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from typing import Callable, Mapping, Optional, Sequence

import math

import numpy as np

from .analyzer import AnalyzerBackend, QueryAnalysis, analyze_query
from .corpus import CorpusIndex, ProvisionVersion, TemporalWindow, parse_iso_date, tokenize
from .embedding import cosine

CHANNEL_KEYWORD = "keyword"
CHANNEL_DENSE = "dense"
CHANNEL_SPARSE = "sparse"
CHANNELS = (CHANNEL_KEYWORD, CHANNEL_DENSE, CHANNEL_SPARSE)


class ChannelUnavailable(RuntimeError):
    """A channel cannot score (for example the embedder failed); fusion skips it."""


@dataclass(frozen=True)
class RetrievalConfig:
    keyword_weight: float = 3.0
    dense_weight: float = 2.0
    sparse_weight: float = 1.0
    rrf_k: float = 60.0
    top_k: int = 10
    bm25_k1: float = 1.5
    bm25_b: float = 0.75
    channel_cutoff: int = 100
    article_bonus: float = 2.0
    temporal_filtering: bool = True

    def __post_init__(self) -> None:
        if self.rrf_k <= 0:
            raise ValueError("rrf_k must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.channel_cutoff < 1:
            raise ValueError("channel_cutoff must be at least 1")
        for name in ("keyword_weight", "dense_weight", "sparse_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.bm25_b <= 1:
            raise ValueError("bm25_b must lie in [0, 1]")
        if self.bm25_k1 < 0:
            raise ValueError("bm25_k1 must be non-negative")


def _ordered_entries(pairs: Sequence[tuple[str, float]]) -> tuple[tuple[str, float], ...]:
    ordered = tuple(sorted(pairs, key=lambda e: (-e[1], e[0])))
    ids = [pid for pid, _ in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate provision id in channel ranking")
    return ordered


@dataclass(frozen=True)
class ChannelRanking:
    """Scored provisions for one channel, best first, ties by ascending id."""

    channel: str
    weight: float
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError("channel weight must be non-negative")
        for (id_a, score_a), (id_b, score_b) in zip(self.entries, self.entries[1:]):
            if score_a < score_b or (score_a == score_b and id_a >= id_b):
                raise ValueError("channel entries must be ordered by (-score, id)")


@dataclass(frozen=True)
class FusedHit:
    provision: ProvisionVersion
    rrf_score: float
    channel_ranks: Mapping[str, Optional[int]]

    @property
    def provision_id(self) -> str:
        return self.provision.provision_id

    @property
    def text(self) -> str:
        return self.provision.text

    @property
    def window(self) -> TemporalWindow:
        return self.provision.window

    @property
    def version_id(self) -> str:
        return self.provision.version_id

    def to_dict(self) -> dict:
        return {
            "provision_id": self.provision_id,
            "score": self.rrf_score,
            "channel_ranks": dict(self.channel_ranks),
            "text": self.text,
            "t_from": self.window.t_from.isoformat(),
            "t_to": self.window.t_to.isoformat() if self.window.t_to else None,
            "version_id": self.version_id,
        }


def temporal_filter(index: CorpusIndex, time_info: Sequence[tuple[date, date]]) -> list[int]:
    """Candidate doc indexes whose windows intersect any query interval.

    An empty ``time_info`` disables filtering and returns every doc.
    """
    if not time_info:
        return list(range(len(index.provisions)))
    return [
        i
        for i, p in enumerate(index.provisions)
        if any(p.window.overlaps(start, end) for start, end in time_info)
    ]


def _label_matches(provision: ProvisionVersion, refs: Sequence[str]) -> bool:
    label = provision.article_label.casefold().strip()
    return any(label == ref.casefold().strip() for ref in refs)


def channel_keyword(
    index: CorpusIndex,
    candidates: Sequence[int],
    analysis: QueryAnalysis,
    config: RetrievalConfig | None = None,
) -> ChannelRanking:
    """Distinct-keyword hit count plus a fixed bonus on article-label match.

    Zero-scoring candidates are omitted, so no keywords and no label
    match yields an empty ranking.
    """
    config = config or RetrievalConfig()
    pairs: list[tuple[str, float]] = []
    for i in candidates:
        provision = index.provisions[i]
        text_cf = provision.text.casefold()
        score = float(sum(1 for kw in analysis.keywords if kw.casefold() in text_cf))
        if _label_matches(provision, analysis.chapter_info):
            score += config.article_bonus
        if score > 0:
            pairs.append((provision.provision_id, score))
    return ChannelRanking(CHANNEL_KEYWORD, config.keyword_weight, _ordered_entries(pairs))


def channel_dense(
    index: CorpusIndex,
    candidates: Sequence[int],
    query: str,
    config: RetrievalConfig | None = None,
    embedder: Callable[[str], np.ndarray] | None = None,
) -> ChannelRanking:
    """Cosine similarity of the raw query embedding against all candidates."""
    config = config or RetrievalConfig()
    embed = embedder if embedder is not None else index.embedder().embed
    try:
        query_vec = np.asarray(embed(query), dtype=np.float64)
    except Exception as exc:
        raise ChannelUnavailable(f"dense embedder failed: {exc}") from exc
    pairs = []
    for i in candidates:
        provision = index.provisions[i]
        if embedder is None:
            doc_vec = index.embeddings[i]
        else:
            try:
                doc_vec = np.asarray(embed(provision.text), dtype=np.float64)
            except Exception as exc:
                raise ChannelUnavailable(f"dense embedder failed: {exc}") from exc
        pairs.append((provision.provision_id, cosine(query_vec, doc_vec)))
    return ChannelRanking(CHANNEL_DENSE, config.dense_weight, _ordered_entries(pairs))


def channel_sparse(
    index: CorpusIndex,
    candidates: Sequence[int],
    query: str,
    config: RetrievalConfig | None = None,
) -> ChannelRanking:
    """Okapi BM25 over corpus-level statistics, scoring only the candidates.

    Uses the non-negative idf variant ln(1 + (N - df + 0.5) / (df + 0.5))
    so that matching any query term helps. Zero-scoring docs are omitted.
    """
    config = config or RetrievalConfig()
    terms = sorted(set(tokenize(query)))
    n_docs = len(index.provisions)
    pairs: list[tuple[str, float]] = []
    if n_docs == 0:
        return ChannelRanking(CHANNEL_SPARSE, config.sparse_weight, ())
    idf = {}
    for term in terms:
        df = index.doc_freq(term)
        if df:
            idf[term] = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
    for i in candidates:
        freqs = index.term_freqs[i]
        length_norm = 1.0 - config.bm25_b + config.bm25_b * (
            index.doc_lengths[i] / index.avg_doc_length if index.avg_doc_length else 0.0
        )
        score = 0.0
        for term, term_idf in idf.items():
            tf = freqs.get(term, 0)
            if tf:
                score += term_idf * (tf * (config.bm25_k1 + 1.0)) / (tf + config.bm25_k1 * length_norm)
        if score > 0:
            pairs.append((index.provisions[i].provision_id, score))
    return ChannelRanking(CHANNEL_SPARSE, config.sparse_weight, _ordered_entries(pairs))


def rrf_fuse(
    rankings: Sequence[ChannelRanking],
    config: RetrievalConfig,
    provisions: Mapping[str, ProvisionVersion],
) -> list[FusedHit]:
    """Weighted reciprocal-rank fusion over channel rankings.

    Each channel contributes weight / (rrf_k + rank) with 1-based ranks;
    a document absent from a channel (or past the per-channel cutoff)
    contributes nothing there. Output is ordered by descending fused
    score, ties by ascending provision id.
    """
    scores: dict[str, float] = {}
    ranks: dict[str, dict[str, int]] = {}
    for ranking in rankings:
        for rank, (pid, _raw) in enumerate(ranking.entries[: config.channel_cutoff], start=1):
            scores[pid] = scores.get(pid, 0.0) + ranking.weight / (config.rrf_k + rank)
            ranks.setdefault(pid, {})[ranking.channel] = rank
    order = sorted(scores, key=lambda pid: (-scores[pid], pid))
    return [
        FusedHit(
            provision=provisions[pid],
            rrf_score=scores[pid],
            channel_ranks={c: ranks[pid].get(c) for c in CHANNELS},
        )
        for pid in order
    ]


def _normalize_hint(
    time_hint: Sequence[tuple[date, date] | Sequence[str]] | None,
) -> list[tuple[date, date]]:
    intervals: list[tuple[date, date]] = []
    for entry in time_hint or ():
        start, end = entry
        if isinstance(start, str):
            start = parse_iso_date(start)
        if isinstance(end, str):
            end = parse_iso_date(end)
        if start > end:
            raise ValueError(f"time hint starts after it ends: {entry!r}")
        intervals.append((start, end))
    return intervals


def retrieve(
    index: CorpusIndex,
    query: str,
    time_hint: Sequence[tuple[date, date] | Sequence[str]] | None = None,
    config: RetrievalConfig | None = None,
    backend: AnalyzerBackend | None = None,
) -> list[FusedHit]:
    """Analyze, filter, score all channels, fuse, and truncate to top_k."""
    config = config or RetrievalConfig()
    if not index.provisions:
        return []
    analysis = analyze_query(query, backend=backend)
    time_info = list(analysis.time_info)
    for interval in _normalize_hint(time_hint):
        if interval not in time_info:
            time_info.append(interval)
    if config.temporal_filtering and time_info:
        candidates = temporal_filter(index, time_info)
    else:
        candidates = list(range(len(index.provisions)))
    if not candidates:
        return []
    rankings = [channel_keyword(index, candidates, analysis, config)]
    try:
        rankings.append(channel_dense(index, candidates, query, config))
    except ChannelUnavailable:
        pass
    rankings.append(channel_sparse(index, candidates, query, config))
    provisions = {index.provisions[i].provision_id: index.provisions[i] for i in candidates}
    hits = rrf_fuse(rankings, config, provisions)
    return hits[: config.top_k]


@dataclass
class RetrievalEngine:
    """An index bound to a config and analyzer backend; what tools and the
    service call into."""

    index: CorpusIndex
    config: RetrievalConfig = field(default_factory=RetrievalConfig)
    backend: AnalyzerBackend | None = None

    def retrieve(
        self,
        query: str,
        time_hint: Sequence[tuple[date, date] | Sequence[str]] | None = None,
        top_k: int | None = None,
    ) -> list[FusedHit]:
        config = self.config
        if top_k is not None and top_k != config.top_k:
            config = replace(config, top_k=top_k)
        return retrieve(self.index, query, time_hint=time_hint, config=config, backend=self.backend)

    def analyze(self, query: str) -> QueryAnalysis:
        return analyze_query(query, backend=self.backend)
