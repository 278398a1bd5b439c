"""Temporally-indexed statute corpus: ingest, validation, point-in-time lookup.

A corpus is a set of provision versions. Each version of an article
carries an inclusive validity window; versions of the same article are
expected to have pairwise disjoint windows, and an absent end date means
the version is currently in force. The index built at ingest time holds
everything the retrieval channels need: token statistics for BM25,
keyword postings, and an embedding table.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .embedding import NgramEmbedder

FORMAT_VERSION = 1

_REQUIRED_KEYS = ("statute_id", "article_label", "version_id", "text", "t_from")

# ASCII alphanumeric runs plus individual CJK characters. Chinese statute
# text carries no word boundaries, so single characters are the unit there.
_TOKEN_RE = re.compile(r"[0-9a-z]+|[一-鿿]")


class CorpusError(ValueError):
    """Malformed corpus records or violated corpus invariants."""


def tokenize(text: str) -> list[str]:
    """Casefolded alphanumeric words plus individual CJK characters."""
    return _TOKEN_RE.findall(text.casefold())


def parse_iso_date(raw: str) -> date:
    return date.fromisoformat(raw)


@dataclass(frozen=True)
class TemporalWindow:
    """Inclusive validity interval; ``t_to`` of None means still in force."""

    t_from: date
    t_to: Optional[date] = None

    def __post_init__(self) -> None:
        if self.t_to is not None and self.t_from > self.t_to:
            raise CorpusError(f"window starts after it ends: {self.t_from} > {self.t_to}")

    def contains(self, day: date) -> bool:
        if day < self.t_from:
            return False
        return self.t_to is None or day <= self.t_to

    def overlaps(self, start: date, end: date) -> bool:
        """True when the window intersects the inclusive interval [start, end]."""
        if end < self.t_from:
            return False
        return self.t_to is None or start <= self.t_to


@dataclass(frozen=True)
class ProvisionVersion:
    statute_id: str
    article_label: str
    version_id: str
    text: str
    window: TemporalWindow
    predecessor_label: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("statute_id", "article_label", "version_id", "text"):
            if not getattr(self, name):
                raise CorpusError(f"{name} must be non-empty")

    @property
    def provision_id(self) -> str:
        return f"{self.statute_id}/{self.article_label}@{self.version_id}"

    def to_record(self) -> dict:
        record = {
            "statute_id": self.statute_id,
            "article_label": self.article_label,
            "version_id": self.version_id,
            "text": self.text,
            "t_from": self.window.t_from.isoformat(),
            "t_to": self.window.t_to.isoformat() if self.window.t_to else None,
        }
        if self.predecessor_label:
            record["predecessor_label"] = self.predecessor_label
        return record


@dataclass(frozen=True)
class IndexConfig:
    embedding_dim: int = 256
    ngram_sizes: tuple[int, ...] = (2, 3)

    def embedder(self) -> NgramEmbedder:
        return NgramEmbedder(dim=self.embedding_dim, ngram_sizes=tuple(self.ngram_sizes))

    def to_dict(self) -> dict:
        return {"embedding_dim": self.embedding_dim, "ngram_sizes": list(self.ngram_sizes)}

    @classmethod
    def from_dict(cls, raw: dict) -> "IndexConfig":
        return cls(
            embedding_dim=int(raw["embedding_dim"]),
            ngram_sizes=tuple(int(n) for n in raw["ngram_sizes"]),
        )


@dataclass
class CorpusIndex:
    """Provision versions plus the statistics the retrieval channels use."""

    config: IndexConfig
    provisions: list[ProvisionVersion]
    term_freqs: list[dict[str, int]]
    doc_lengths: list[int]
    avg_doc_length: float
    postings: dict[str, list[int]]
    embeddings: np.ndarray
    _by_id: dict[str, int] = field(default_factory=dict)
    _by_article: dict[tuple[str, str], list[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._by_id = {p.provision_id: i for i, p in enumerate(self.provisions)}
        self._by_article = {}
        for i, p in enumerate(self.provisions):
            self._by_article.setdefault((p.statute_id, p.article_label), []).append(i)

    def __len__(self) -> int:
        return len(self.provisions)

    def lookup(self, provision_id: str) -> ProvisionVersion:
        return self.provisions[self._by_id[provision_id]]

    def doc_freq(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def versions_of(self, statute_id: str, article_label: str) -> list[ProvisionVersion]:
        return [self.provisions[i] for i in self._by_article.get((statute_id, article_label), [])]

    def embedder(self) -> NgramEmbedder:
        return self.config.embedder()


def _parse_record(obj: object, line_no: int) -> ProvisionVersion:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: record must be an object")
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise CorpusError(f"line {line_no}: missing field '{key}'")
    for key in _REQUIRED_KEYS:
        if not isinstance(obj[key], str) or not obj[key]:
            raise CorpusError(f"line {line_no}: field '{key}' must be a non-empty string")
    t_to_raw = obj.get("t_to")
    if t_to_raw is not None and not isinstance(t_to_raw, str):
        raise CorpusError(f"line {line_no}: field 't_to' must be a string or null")
    predecessor = obj.get("predecessor_label")
    if predecessor is not None and not isinstance(predecessor, str):
        raise CorpusError(f"line {line_no}: field 'predecessor_label' must be a string")
    try:
        t_from = parse_iso_date(obj["t_from"])
        t_to = parse_iso_date(t_to_raw) if t_to_raw else None
    except ValueError as exc:
        raise CorpusError(f"line {line_no}: bad date: {exc}") from None
    try:
        window = TemporalWindow(t_from, t_to)
        return ProvisionVersion(
            statute_id=obj["statute_id"],
            article_label=obj["article_label"],
            version_id=obj["version_id"],
            text=obj["text"],
            window=window,
            predecessor_label=predecessor,
        )
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from None


def _iter_lines(source: Iterable[str] | str | Path) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    return source


def ingest_corpus(source: Iterable[str] | str | Path, config: IndexConfig | None = None) -> CorpusIndex:
    """Build a CorpusIndex from line-delimited JSON records.

    ``source`` may be a path or any iterable of lines. Blank lines are
    skipped. Raises CorpusError (with the offending line number) on
    malformed records, duplicate (statute, article, version) keys, or
    inverted windows.
    """
    config = config or IndexConfig()
    provisions: list[ProvisionVersion] = []
    seen: dict[tuple[str, str, str], int] = {}
    for line_no, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: invalid JSON: {exc}") from None
        version = _parse_record(obj, line_no)
        key = (version.statute_id, version.article_label, version.version_id)
        if key in seen:
            raise CorpusError(
                f"line {line_no}: duplicate version {version.provision_id}"
                f" (first seen on line {seen[key]})"
            )
        seen[key] = line_no
        provisions.append(version)

    provisions.sort(key=lambda p: p.provision_id)
    embedder = config.embedder()
    term_freqs: list[dict[str, int]] = []
    doc_lengths: list[int] = []
    postings: dict[str, list[int]] = {}
    embeddings = np.zeros((len(provisions), config.embedding_dim), dtype=np.float64)
    for i, provision in enumerate(provisions):
        tokens = tokenize(provision.text)
        freqs: dict[str, int] = {}
        for tok in tokens:
            freqs[tok] = freqs.get(tok, 0) + 1
        term_freqs.append(freqs)
        doc_lengths.append(len(tokens))
        for term in sorted(freqs):
            postings.setdefault(term, []).append(i)
        embeddings[i] = embedder.embed(provision.text)
    avg = float(sum(doc_lengths)) / len(doc_lengths) if doc_lengths else 0.0
    return CorpusIndex(
        config=config,
        provisions=provisions,
        term_freqs=term_freqs,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        postings=postings,
        embeddings=embeddings,
    )


@dataclass(frozen=True)
class WindowOverlap:
    statute_id: str
    article_label: str
    version_a: str
    version_b: str
    start: date
    end: Optional[date]

    def to_dict(self) -> dict:
        return {
            "statute_id": self.statute_id,
            "article_label": self.article_label,
            "version_a": self.version_a,
            "version_b": self.version_b,
            "start": self.start.isoformat(),
            "end": self.end.isoformat() if self.end else None,
        }


@dataclass(frozen=True)
class CoverageGap:
    statute_id: str
    article_label: str
    version_before: str
    version_after: str
    covered_until: date
    resumes_at: date

    def to_dict(self) -> dict:
        return {
            "statute_id": self.statute_id,
            "article_label": self.article_label,
            "version_before": self.version_before,
            "version_after": self.version_after,
            "covered_until": self.covered_until.isoformat(),
            "resumes_at": self.resumes_at.isoformat(),
        }


@dataclass
class CorpusReport:
    overlaps: list[WindowOverlap]
    gaps: list[CoverageGap]

    @property
    def ok(self) -> bool:
        return not self.overlaps and not self.gaps

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "overlaps": [o.to_dict() for o in self.overlaps],
            "gaps": [g.to_dict() for g in self.gaps],
        }


def validate_corpus(index: CorpusIndex) -> CorpusReport:
    """Report window overlaps and coverage gaps per (statute, article).

    Overlapping windows violate the version-disjointness invariant; gaps
    are legitimate (an article may simply be out of force for a while)
    but are surfaced for inspection.
    """
    overlaps: list[WindowOverlap] = []
    gaps: list[CoverageGap] = []
    for (statute_id, label), ixs in sorted(index._by_article.items()):
        versions = sorted(
            (index.provisions[i] for i in ixs),
            key=lambda p: (p.window.t_from, p.version_id),
        )
        for a_pos in range(len(versions)):
            for b_pos in range(a_pos + 1, len(versions)):
                a, b = versions[a_pos], versions[b_pos]
                a_end = a.window.t_to
                if a_end is not None and a_end < b.window.t_from:
                    continue
                ends = [w for w in (a.window.t_to, b.window.t_to) if w is not None]
                overlaps.append(
                    WindowOverlap(
                        statute_id=statute_id,
                        article_label=label,
                        version_a=a.version_id,
                        version_b=b.version_id,
                        start=max(a.window.t_from, b.window.t_from),
                        end=min(ends) if len(ends) == 2 else (ends[0] if ends else None),
                    )
                )
        for prev, nxt in zip(versions, versions[1:]):
            if prev.window.t_to is None:
                continue
            if nxt.window.t_from > prev.window.t_to + timedelta(days=1):
                gaps.append(
                    CoverageGap(
                        statute_id=statute_id,
                        article_label=label,
                        version_before=prev.version_id,
                        version_after=nxt.version_id,
                        covered_until=prev.window.t_to,
                        resumes_at=nxt.window.t_from,
                    )
                )
    return CorpusReport(overlaps=overlaps, gaps=gaps)


def effective_at(
    index: CorpusIndex, statute_id: str, article_label: str, day: date
) -> Optional[ProvisionVersion]:
    """The version of an article in force on ``day``, or None.

    Disjoint windows guarantee at most one match; should the corpus be
    invalid, the latest-starting matching version wins.
    """
    matches = [
        p
        for p in index.versions_of(statute_id, article_label)
        if p.window.contains(day)
    ]
    if not matches:
        return None
    return max(matches, key=lambda p: (p.window.t_from, p.version_id))


def save_index(index: CorpusIndex, directory: str | Path) -> Path:
    """Persist the index as a records file plus a versioned manifest.

    Statistics are not serialized: ingest is deterministic, so the index
    is rebuilt from the records on load and the manifest checksum pins
    the record bytes.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = "".join(
        json.dumps(p.to_record(), ensure_ascii=False, sort_keys=True) + "\n"
        for p in index.provisions
    )
    records_path = directory / "records.jsonl"
    records_path.write_text(records, encoding="utf-8")
    manifest = {
        "format_version": FORMAT_VERSION,
        "record_count": len(index.provisions),
        "config": index.config.to_dict(),
        "records_sha256": hashlib.sha256(records.encode("utf-8")).hexdigest(),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return directory


def load_index(directory: str | Path) -> CorpusIndex:
    """Rebuild a persisted index, verifying manifest version and checksum."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise CorpusError(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CorpusError(f"unsupported index format version {version!r}")
    records = (directory / "records.jsonl").read_text(encoding="utf-8")
    digest = hashlib.sha256(records.encode("utf-8")).hexdigest()
    if digest != manifest.get("records_sha256"):
        raise CorpusError("records checksum mismatch; index directory is corrupt")
    index = ingest_corpus(records.splitlines(), IndexConfig.from_dict(manifest["config"]))
    if len(index) != manifest.get("record_count"):
        raise CorpusError("record count mismatch between manifest and records")
    return index
