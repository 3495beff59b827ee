"""Relevance filtering: keep document sentences a summary plausibly relies on.

Each document sentence gets one pooled score (its best score against
any summary sentence). Sentences scoring strictly above the threshold
are anchors; a symmetric window around each anchor is kept for context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyFilterError, ScoringError
from .scorer import RelevanceMatrix
from .segmentation import SentenceDoc


class EmptyFallback(Enum):
    """What to do when no sentence clears the threshold."""

    FULL_DOCUMENT = "full_document"
    EMPTY_ERROR = "empty_error"


@dataclass(frozen=True, slots=True)
class PooledScores:
    """Per-document-sentence max over summary sentences."""

    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, slots=True)
class FilterConfig:
    beta: float
    window_radius: int = 1
    empty_fallback: EmptyFallback = EmptyFallback.FULL_DOCUMENT

    def __post_init__(self) -> None:
        if not math.isfinite(self.beta):
            raise ScoringError(f"beta must be finite, got {self.beta!r}")
        if self.window_radius < 0:
            raise ScoringError(f"window_radius must be >= 0, got {self.window_radius}")


@dataclass(frozen=True, slots=True)
class FilteredDocument:
    """The document text the judge will actually see."""

    kept_indices: tuple[int, ...]
    text: str
    removal_rate: float
    fallback_used: bool


def max_pool_rows(matrix: RelevanceMatrix) -> PooledScores:
    """Collapse each document sentence's row to its best score."""
    return PooledScores(values=tuple(max(matrix.row(i)) for i in range(matrix.rows)))


def select_indices(pooled: PooledScores, config: FilterConfig) -> list[int]:
    """Indices to keep: anchors scoring strictly above beta, plus a
    window of ``window_radius`` neighbors on each side, clamped to the
    document bounds. Sorted, duplicate-free."""
    n = len(pooled)
    kept: set[int] = set()
    for i, score in enumerate(pooled.values):
        if score > config.beta:
            lo = max(0, i - config.window_radius)
            hi = min(n - 1, i + config.window_radius)
            kept.update(range(lo, hi + 1))
    return sorted(kept)


def assemble_filtered(
    doc: SentenceDoc, kept: list[int], config: FilterConfig
) -> FilteredDocument:
    """Join the kept sentences back into judge-ready text.

    removal_rate is computed as (M - kept) / M so that removing 7 of 10
    sentences yields exactly 0.7.
    """
    m = len(doc)
    if m < 1:
        raise ScoringError("cannot filter an empty document")
    for idx in kept:
        if not 0 <= idx < m:
            raise ScoringError(f"kept index {idx} outside document of {m} sentences")
    if list(kept) != sorted(set(kept)):
        raise ScoringError("kept indices must be sorted and unique")

    if not kept:
        if config.empty_fallback is EmptyFallback.EMPTY_ERROR:
            raise EmptyFilterError(
                f"no sentence scored above beta={config.beta!r}; nothing to keep"
            )
        return FilteredDocument(
            kept_indices=tuple(range(m)),
            text=" ".join(doc.texts),
            removal_rate=0.0,
            fallback_used=True,
        )

    return FilteredDocument(
        kept_indices=tuple(kept),
        text=" ".join(doc.sentences[i].text for i in kept),
        removal_rate=(m - len(kept)) / m,
        fallback_used=False,
    )


def filter_document(
    doc: SentenceDoc, matrix: RelevanceMatrix, config: FilterConfig
) -> FilteredDocument:
    """Pool, select, and assemble in one step."""
    if matrix.rows != len(doc):
        raise ScoringError(
            f"matrix has {matrix.rows} rows but document has {len(doc)} sentences"
        )
    pooled = max_pool_rows(matrix)
    kept = select_indices(pooled, config)
    return assemble_filtered(doc, kept, config)
