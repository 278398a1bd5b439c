"""Deterministic text embeddings from hashed character n-grams.

The default embedder maps text to term-frequency vectors over hashed
character n-grams. It is deliberately simple: no model weights, no
randomness, stable across processes. Any callable with the same
``embed(text) -> vector`` shape can be swapped in for the dense
retrieval channel.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass

import numpy as np

_WS_RE = re.compile(r"\s+")


def _normalize(text: str) -> str:
    return _WS_RE.sub(" ", text.casefold()).strip()


@dataclass(frozen=True)
class NgramEmbedder:
    """Hashed character n-gram bag embedder.

    Counts character n-grams of the configured sizes over the
    whitespace-normalized, casefolded text and accumulates them into
    ``dim`` buckets keyed by CRC32 of the n-gram bytes.
    """

    dim: int = 256
    ngram_sizes: tuple[int, ...] = (2, 3)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("embedding dim must be positive")
        if not self.ngram_sizes or any(n < 1 for n in self.ngram_sizes):
            raise ValueError("n-gram sizes must be positive")

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        norm = _normalize(text)
        for n in self.ngram_sizes:
            for i in range(len(norm) - n + 1):
                gram = norm[i : i + n]
                vec[zlib.crc32(gram.encode("utf-8")) % self.dim] += 1.0
        return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector is all zeros.

    Computed as dot / sqrt(|a|^2 * |b|^2) so identical vectors score
    exactly 1.0.
    """
    dot = float(np.dot(a, b))
    na = float(np.dot(a, a))
    nb = float(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / float(np.sqrt(na * nb))
