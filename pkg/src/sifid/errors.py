"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class SifidError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(SifidError):
    """Invalid or missing configuration (bad flag combination, no endpoint, ...)."""


class DatasetError(SifidError):
    """Dataset file unreadable or structurally unusable."""


class TransportError(SifidError):
    """Backend unreachable after the retry budget was spent."""


class ProtocolError(SifidError):
    """Backend reachable but its payload violates the wire contract.

    ``body`` carries the raw response text for debugging.
    """

    def __init__(self, message: str, body: str | None = None):
        super().__init__(message)
        self.body = body


class JudgeError(SifidError):
    """Judge endpoint returned a non-retryable error status."""

    def __init__(self, message: str, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


class ScoringError(SifidError):
    """A sentence pair could not be scored (zero vector, dimension mismatch, ...).

    ``sentence_index`` names the offending sentence when known.
    """

    def __init__(self, message: str, sentence_index: int | None = None):
        super().__init__(message)
        self.sentence_index = sentence_index


class RenderError(SifidError):
    """Prompt rendering failed (empty slot content, malformed template)."""


class EmptyFilterError(SifidError):
    """Filter kept no sentences and the configured policy forbids falling back."""


class UndefinedMetricError(SifidError):
    """Metric is mathematically undefined for the given inputs (single-class golds)."""


class HighErrorRateError(SifidError):
    """Too many examples errored for the report to be trustworthy.

    The partial report is still persisted and attached here for inspection.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
