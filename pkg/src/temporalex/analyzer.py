"""Structured query analysis: temporal intervals, article references, keywords.

The default backend is pattern-based and fully deterministic. A
text-generation backend (an LLM prompted to emit the same JSON shape)
can be plugged in; its raw output is validated against the contract
before it is accepted.
"""

from __future__ import annotations

import calendar
import json
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Optional, Protocol

DEFAULT_STOPWORDS = frozenset(
    """
    a an and are as at be but by for from how if in into is it its of on or
    over per please s shall such that the their there this to under upon was
    were what when where which who whose why will with
    """.split()
)

_WS_RE = re.compile(r"\s+")


class AnalysisError(ValueError):
    """Backend output that fails the analysis contract; carries the raw text."""

    def __init__(self, message: str, raw_output: Optional[str] = None):
        super().__init__(message)
        self.raw_output = raw_output


def normalize_query(query: str) -> str:
    """Casefold and collapse whitespace; keywords are substrings of this."""
    return _WS_RE.sub(" ", query.casefold()).strip()


@dataclass(frozen=True)
class QueryAnalysis:
    time_info: tuple[tuple[date, date], ...] = ()
    chapter_info: tuple[str, ...] = ()
    keywords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for start, end in self.time_info:
            if start > end:
                raise AnalysisError(f"interval starts after it ends: {start} > {end}")
        for kw in self.keywords:
            if not kw:
                raise AnalysisError("keywords must be non-empty")

    def to_dict(self) -> dict:
        return {
            "time_info": [[a.isoformat(), b.isoformat()] for a, b in self.time_info],
            "chapter_info": list(self.chapter_info),
            "keywords": list(self.keywords),
        }


# --- numerals ---------------------------------------------------------------

_CN_DIGITS = "〇一二三四五六七八九"
_CN_NUMERAL_CHARS = "〇一二三四五六七八九十百千"


def int_to_chinese_numeral(n: int) -> str:
    """Render 0..9999 in Chinese numerals, statute-label style (12 -> 十二)."""
    if not 0 <= n <= 9999:
        raise ValueError(f"numeral out of range: {n}")
    if n == 0:
        return _CN_DIGITS[0]
    digits = [(n // 1000) % 10, (n // 100) % 10, (n // 10) % 10, n % 10]
    units = ["千", "百", "十", ""]
    parts: list[str] = []
    started = False
    pending_zero = False
    for d, unit in zip(digits, units):
        if d == 0:
            if started:
                pending_zero = True
            continue
        if pending_zero:
            parts.append("零")
            pending_zero = False
        parts.append(_CN_DIGITS[d] + unit)
        started = True
    out = "".join(parts)
    if out.startswith("一十"):
        out = out[1:]
    return out


# --- configuration ----------------------------------------------------------

NUMERAL_STYLES = ("identity", "chinese")


@dataclass(frozen=True)
class AnalyzerConfig:
    """Pattern-backend knobs.

    ``numeral_style`` controls how digit article numbers are rendered in
    normalized references: "identity" keeps them as digits, "chinese"
    converts them to Chinese numerals so they match corpora labeled that
    way. Relative temporal phrases resolve against ``reference_date``;
    with no reference date configured they are ignored.
    """

    numeral_style: str = "identity"
    article_template: str = "Article {num}"
    chapter_template: str = "Chapter {num}"
    reference_date: Optional[date] = None
    stopwords: frozenset[str] = DEFAULT_STOPWORDS

    def __post_init__(self) -> None:
        if self.numeral_style not in NUMERAL_STYLES:
            raise ValueError(f"unknown numeral style {self.numeral_style!r}")

    def render_number(self, token: str) -> str:
        if token.isdigit():
            if self.numeral_style == "chinese":
                return int_to_chinese_numeral(int(token))
            return str(int(token))
        return token


# --- date expansion ---------------------------------------------------------

_YMD_PATTERNS = (
    re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})$"),
    re.compile(r"^(\d{4})/(\d{1,2})/(\d{1,2})$"),
    re.compile(r"^(\d{4})年(\d{1,2})月(\d{1,2})日$"),
)
_YM_PATTERNS = (
    re.compile(r"^(\d{4})-(\d{1,2})$"),
    re.compile(r"^(\d{4})/(\d{1,2})$"),
    re.compile(r"^(\d{4})年(\d{1,2})月$"),
)
_Y_PATTERNS = (
    re.compile(r"^(\d{4})$"),
    re.compile(r"^(\d{4})年$"),
)


def expand_partial_date(token: str) -> Optional[tuple[date, date]]:
    """Expand a year / year-month / full-date token to an inclusive interval.

    "2024" covers the whole year, "2024-02" the whole month (leap years
    included), and a full date is a single-day interval. Returns None
    when the token is not a supported date pattern or not a real
    calendar date.
    """
    token = token.strip()
    for pat in _YMD_PATTERNS:
        m = pat.match(token)
        if m:
            try:
                day = date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
            except ValueError:
                return None
            return (day, day)
    for pat in _YM_PATTERNS:
        m = pat.match(token)
        if m:
            year, month = int(m.group(1)), int(m.group(2))
            if not 1 <= month <= 12:
                return None
            last = calendar.monthrange(year, month)[1]
            return (date(year, month, 1), date(year, month, last))
    for pat in _Y_PATTERNS:
        m = pat.match(token)
        if m:
            year = int(m.group(1))
            return (date(year, 1, 1), date(year, 12, 31))
    return None


# --- article references -----------------------------------------------------

_REF_PATTERNS = (
    ("article", re.compile(r"\bart(?:icle)?\.?\s*(?:no\.?\s*)?(\d{1,4})\b", re.IGNORECASE)),
    ("chapter", re.compile(r"\bchap(?:ter)?\.?\s*(\d{1,4})\b", re.IGNORECASE)),
    ("article", re.compile(rf"第\s*(\d{{1,4}}|[{_CN_NUMERAL_CHARS}]+)\s*条")),
    ("chapter", re.compile(rf"第\s*(\d{{1,4}}|[{_CN_NUMERAL_CHARS}]+)\s*章")),
)


def normalize_article_ref(ref: str, config: AnalyzerConfig | None = None) -> Optional[str]:
    """Canonicalize an article or chapter reference to the corpus label style.

    Returns None when no reference designator is found. Numbers written
    in Chinese numerals are kept verbatim; digit numbers are rendered
    through the configured numeral style.
    """
    config = config or AnalyzerConfig()
    best: Optional[tuple[int, str, str]] = None
    for kind, pattern in _REF_PATTERNS:
        m = pattern.search(ref)
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), kind, m.group(1))
    if best is None:
        return None
    _, kind, number = best
    template = config.article_template if kind == "article" else config.chapter_template
    return template.format(num=config.render_number(number))


# --- temporal mentions ------------------------------------------------------

# Date-like spans are scanned longest-first so "2024-02-15" is not also
# picked up as a bare "2024". Bare years are restricted to 1900-2099.
_DATE_SCAN = re.compile(
    r"(?<![\d])(?:"
    r"\d{4}-\d{1,2}-\d{1,2}"
    r"|\d{4}/\d{1,2}/\d{1,2}"
    r"|\d{4}年\d{1,2}月\d{1,2}日"
    r"|\d{4}-\d{1,2}"
    r"|\d{4}/\d{1,2}"
    r"|\d{4}年\d{1,2}月"
    r"|\d{4}年"
    r"|(?:19|20)\d{2}"
    r")(?![\d月日])"
)

_RELATIVE_PHRASES = ("currently", "current", "today", "now", "目前", "现在", "今天", "现行")


# --- pattern backend --------------------------------------------------------

_WORD_SCAN = re.compile(r"[0-9a-z]+(?:'[a-z]+)?|[一-鿿]+")


class AnalyzerBackend(Protocol):
    def analyze(self, query: str) -> QueryAnalysis: ...


@dataclass(frozen=True)
class PatternAnalyzer:
    """Deterministic regex-driven analysis backend."""

    config: AnalyzerConfig = field(default_factory=AnalyzerConfig)

    def analyze(self, query: str) -> QueryAnalysis:
        if not query or not query.strip():
            raise AnalysisError("query must be non-empty")
        # All offsets below live in casefolded space; casefolding can change
        # string length, so mixing original and folded offsets is unsafe.
        lowered = query.casefold()
        consumed: list[tuple[int, int]] = []

        def overlaps_consumed(start: int, end: int) -> bool:
            return any(start < c_end and c_start < end for c_start, c_end in consumed)

        chapter_info: list[str] = []
        for kind, pattern in _REF_PATTERNS:
            for m in pattern.finditer(lowered):
                if overlaps_consumed(m.start(), m.end()):
                    continue
                consumed.append((m.start(), m.end()))
                template = (
                    self.config.article_template if kind == "article" else self.config.chapter_template
                )
                label = template.format(num=self.config.render_number(m.group(1)))
                if label not in chapter_info:
                    chapter_info.append(label)

        time_info: list[tuple[date, date]] = []
        for m in _DATE_SCAN.finditer(lowered):
            if overlaps_consumed(m.start(), m.end()):
                continue
            interval = expand_partial_date(m.group(0))
            consumed.append((m.start(), m.end()))
            if interval is not None and interval not in time_info:
                time_info.append(interval)

        residual_chars = list(lowered)
        for start, end in consumed:
            for i in range(start, end):
                residual_chars[i] = " "
        residual = "".join(residual_chars)

        if self.config.reference_date is not None:
            for phrase in _RELATIVE_PHRASES:
                if re.search(rf"(?<![0-9a-z]){re.escape(phrase)}(?![0-9a-z])", residual):
                    point = (self.config.reference_date, self.config.reference_date)
                    if point not in time_info:
                        time_info.append(point)
                    break

        keywords: list[str] = []

        def emit(kw: str) -> None:
            if kw and kw not in keywords:
                keywords.append(kw)

        # Compound keywords are contiguous runs of content words separated by
        # nothing but whitespace in the query itself; consumed dates and
        # references break a run because their characters are not whitespace
        # in ``lowered``. The phrase is the verbatim query span (whitespace
        # collapsed), so every keyword occurs in the normalized query.
        group: list[str] = []
        span = (0, 0)

        def flush() -> None:
            if len(group) > 1:
                emit(_WS_RE.sub(" ", lowered[span[0] : span[1]]))
            for word in group:
                emit(word)

        for m in _WORD_SCAN.finditer(residual):
            word = m.group(0)
            if word in self.config.stopwords or (len(word) == 1 and word.isascii()):
                flush()
                group = []
            elif group and lowered[span[1] : m.start()].strip() == "":
                group.append(word)
                span = (span[0], m.end())
            else:
                flush()
                group = [word]
                span = (m.start(), m.end())
        flush()

        return QueryAnalysis(
            time_info=tuple(time_info),
            chapter_info=tuple(chapter_info),
            keywords=tuple(keywords),
        )


# --- pluggable text backend -------------------------------------------------

def validate_analysis_payload(raw_output: str, query: str) -> QueryAnalysis:
    """Parse and contract-check a backend's raw JSON output.

    Required shape: object with list-valued keys "time_info" (pairs of
    ISO dates, start <= end), "chapter_info" (strings), and "keywords"
    (non-empty strings occurring in the normalized query). Violations
    raise AnalysisError carrying the raw output.
    """
    def fail(msg: str) -> AnalysisError:
        return AnalysisError(msg, raw_output=raw_output)

    try:
        obj = json.loads(raw_output)
    except json.JSONDecodeError as exc:
        raise fail(f"backend output is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise fail("backend output must be a JSON object")
    for key in ("time_info", "chapter_info", "keywords"):
        if key not in obj or not isinstance(obj[key], list):
            raise fail(f"backend output missing list field '{key}'")

    time_info: list[tuple[date, date]] = []
    for entry in obj["time_info"]:
        if not isinstance(entry, list) or len(entry) != 2:
            raise fail("time_info entries must be [start, end] pairs")
        try:
            start, end = date.fromisoformat(entry[0]), date.fromisoformat(entry[1])
        except (TypeError, ValueError):
            raise fail(f"time_info entry is not a pair of ISO dates: {entry!r}") from None
        if start > end:
            raise fail(f"time_info interval starts after it ends: {entry!r}")
        time_info.append((start, end))

    for label in obj["chapter_info"]:
        if not isinstance(label, str) or not label:
            raise fail(f"chapter_info entries must be non-empty strings: {label!r}")

    norm = normalize_query(query)
    for kw in obj["keywords"]:
        if not isinstance(kw, str) or not kw:
            raise fail(f"keywords must be non-empty strings: {kw!r}")
        if normalize_query(kw) not in norm:
            raise fail(f"keyword {kw!r} does not occur in the query")

    return QueryAnalysis(
        time_info=tuple(time_info),
        chapter_info=tuple(obj["chapter_info"]),
        keywords=tuple(obj["keywords"]),
    )


@dataclass
class TextAnalyzerBackend:
    """Wraps a text-generation callable emitting the analysis JSON shape."""

    generate: Callable[[str], str]

    def analyze(self, query: str) -> QueryAnalysis:
        if not query or not query.strip():
            raise AnalysisError("query must be non-empty")
        return validate_analysis_payload(self.generate(query), query)


def analyze_query(query: str, backend: AnalyzerBackend | None = None) -> QueryAnalysis:
    """Run query analysis through the given backend (default: patterns)."""
    backend = backend or PatternAnalyzer()
    return backend.analyze(query)
