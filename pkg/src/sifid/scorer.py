"""Sentence-pair relevance scoring.

Produces the M x N relevance matrix between document sentences and
summary sentences. Three scorer variants share one matrix shape:

* ``entailment``: net entailment (entailment minus contradiction) from
  an NLI backend, with the document sentence as premise.
* ``similarity``: cosine similarity between sentence embeddings.
* ``mock``: a deterministic offline rule used by tests and dry runs.
"""

from __future__ import annotations

import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import requests

from .cache import CacheKey, ResponseCache, make_key
from .errors import ProtocolError, ScoringError
from .segmentation import SentenceDoc
from .transport import post_json

DEFAULT_BATCH_SIZE = 64
DEFAULT_MAX_IN_FLIGHT = 4

# Probabilities from an NLI backend must form a distribution, within
# this tolerance on the sum.
PROB_SUM_TOLERANCE = 1e-4

_WORD = re.compile(r"[a-z0-9]+")


class ScorerVariant(Enum):
    ENTAILMENT = "entailment"
    SIMILARITY = "similarity"
    MOCK = "mock"


@dataclass(frozen=True, slots=True)
class ScorerKind:
    """Which scoring rule to use and the model identity behind it.

    ``model_id`` is part of every cache key, so it must name the model
    actually served by the backend; responses reporting a different
    model are rejected rather than cached under the wrong identity.
    """

    variant: ScorerVariant
    model_id: str

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ScoringError("scorer model_id must be non-empty")


@dataclass(frozen=True, slots=True)
class NliProbs:
    """Class probabilities for one (premise, hypothesis) pair."""

    entailment: float
    neutral: float
    contradiction: float

    def validate(self) -> None:
        parts = {
            "entailment": self.entailment,
            "neutral": self.neutral,
            "contradiction": self.contradiction,
        }
        for name, value in parts.items():
            if not math.isfinite(value):
                raise ProtocolError(f"NLI probability {name} is not finite: {value!r}")
            if not 0.0 <= value <= 1.0:
                raise ProtocolError(f"NLI probability {name} out of [0, 1]: {value!r}")
        total = self.entailment + self.neutral + self.contradiction
        if abs(total - 1.0) > PROB_SUM_TOLERANCE:
            raise ProtocolError(f"NLI probabilities sum to {total!r}, expected 1")


def net_entailment(probs: NliProbs) -> float:
    """Entailment minus contradiction, in [-1, 1]."""
    return probs.entailment - probs.contradiction


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Clamping absorbs float rounding that would otherwise push identical
    vectors to 1 + epsilon. Mismatched dimensions and zero vectors are
    scoring errors, not silent zeros.
    """
    if len(u) == 0 or len(v) == 0:
        raise ScoringError("cannot take cosine of an empty vector")
    if len(u) != len(v):
        raise ScoringError(f"vector dimensions differ: {len(u)} vs {len(v)}")
    dot = 0.0
    nu = 0.0
    nv = 0.0
    for a, b in zip(u, v):
        dot += a * b
        nu += a * a
        nv += b * b
    if nu == 0.0 or nv == 0.0:
        raise ScoringError("cannot take cosine of a zero vector")
    value = dot / math.sqrt(nu * nv)
    if not math.isfinite(value):
        raise ScoringError(f"cosine similarity is not finite: {value!r}")
    return max(-1.0, min(1.0, value))


@dataclass(frozen=True, slots=True)
class RelevanceMatrix:
    """Row-major M x N scores: rows are document sentences, columns summary sentences."""

    rows: int
    cols: int
    scores: tuple[float, ...]
    kind: ScorerKind

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ScoringError(f"matrix must be at least 1x1, got {self.rows}x{self.cols}")
        if len(self.scores) != self.rows * self.cols:
            raise ScoringError(
                f"expected {self.rows * self.cols} scores, got {len(self.scores)}"
            )

    def at(self, i: int, j: int) -> float:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"({i}, {j}) outside {self.rows}x{self.cols} matrix")
        return self.scores[i * self.cols + j]

    def row(self, i: int) -> tuple[float, ...]:
        if not 0 <= i < self.rows:
            raise IndexError(f"row {i} outside {self.rows}x{self.cols} matrix")
        return self.scores[i * self.cols : (i + 1) * self.cols]

    def to_rows(self) -> list[list[float]]:
        return [list(self.row(i)) for i in range(self.rows)]


def mock_pair_score(premise: str, hypothesis: str) -> float:
    """1.0 when the pair shares any word of five or more characters, else -1.0."""
    left = {w for w in _WORD.findall(premise.lower()) if len(w) >= 5}
    if not left:
        return -1.0
    right = {w for w in _WORD.findall(hypothesis.lower()) if len(w) >= 5}
    return 1.0 if left & right else -1.0


class MockScorer:
    """In-process pair scorer for tests and offline dry runs.

    Counts invocations so tests can assert that a warm cache never
    reaches the backend.
    """

    model_id = "mock"

    def __init__(self) -> None:
        self.calls = 0
        self.pairs_scored = 0

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        self.calls += 1
        self.pairs_scored += len(pairs)
        return [mock_pair_score(p, h) for p, h in pairs]


class HttpScorer:
    """Client for a remote scoring service speaking the /v1/nli and /v1/embed protocol."""

    def __init__(
        self,
        base_url: str,
        *,
        token: str | None = None,
        timeout: float = 60.0,
        retry_budget: int = 3,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.token = token if token is not None else os.environ.get("SIFID_SCORER_TOKEN")
        self.timeout = timeout
        self.retry_budget = retry_budget
        self.backoff_base = backoff_base
        self.session = session or requests.Session()
        self.calls = 0

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        self.calls += 1
        status, body, _ = post_json(
            self.session,
            f"{self.base_url}{path}",
            payload,
            headers=self._headers(),
            timeout=self.timeout,
            retry_budget=self.retry_budget,
            backoff_base=self.backoff_base,
        )
        text = body.decode("utf-8", errors="replace")
        if status != 200:
            raise ProtocolError(f"scorer endpoint returned status {status}", body=text)
        try:
            parsed = json.loads(text)
        except ValueError as exc:
            raise ProtocolError(f"scorer response is not JSON: {exc}", body=text) from exc
        if not isinstance(parsed, dict):
            raise ProtocolError("scorer response is not a JSON object", body=text)
        return parsed

    def nli(self, pairs: Sequence[tuple[str, str]]) -> tuple[str, list[NliProbs]]:
        payload = {
            "pairs": [{"premise": p, "hypothesis": h} for p, h in pairs]
        }
        parsed = self._post("/v1/nli", payload)
        model = parsed.get("model")
        results = parsed.get("results")
        if not isinstance(model, str) or not isinstance(results, list):
            raise ProtocolError(
                "scorer NLI response missing 'model' or 'results'", body=json.dumps(parsed)
            )
        if len(results) != len(pairs):
            raise ProtocolError(
                f"scorer returned {len(results)} results for {len(pairs)} pairs",
                body=json.dumps(parsed),
            )
        probs = []
        for item in results:
            probs.append(_parse_nli_item(item))
        return model, probs

    def embed(self, texts: Sequence[str]) -> tuple[str, list[list[float]]]:
        parsed = self._post("/v1/embed", {"inputs": list(texts)})
        model = parsed.get("model")
        dim = parsed.get("dim")
        vectors = parsed.get("vectors")
        if not isinstance(model, str) or not isinstance(dim, int) or not isinstance(vectors, list):
            raise ProtocolError(
                "scorer embed response missing 'model', 'dim', or 'vectors'",
                body=json.dumps(parsed),
            )
        if len(vectors) != len(texts):
            raise ProtocolError(
                f"scorer returned {len(vectors)} vectors for {len(texts)} inputs",
                body=json.dumps(parsed),
            )
        out = []
        for vec in vectors:
            out.append(_parse_vector(vec, dim))
        return model, out


def _parse_nli_item(item: object) -> NliProbs:
    if not isinstance(item, dict):
        raise ProtocolError(f"NLI result item is not an object: {item!r}")
    try:
        probs = NliProbs(
            entailment=float(item["entailment"]),
            neutral=float(item["neutral"]),
            contradiction=float(item["contradiction"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed NLI result item: {item!r}") from exc
    probs.validate()
    return probs


def _parse_vector(vec: object, dim: int) -> list[float]:
    if not isinstance(vec, list) or len(vec) != dim:
        raise ProtocolError(f"embedding vector does not have declared dim {dim}: {vec!r}")
    out = []
    for x in vec:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ProtocolError(f"embedding component is not a number: {x!r}")
        value = float(x)
        if not math.isfinite(value):
            raise ProtocolError(f"embedding component is not finite: {value!r}")
        out.append(value)
    return out


def _check_model(kind: ScorerKind, reported: str) -> None:
    if reported != kind.model_id:
        raise ProtocolError(
            f"scorer model mismatch: configured {kind.model_id!r}, "
            f"endpoint reports {reported!r}"
        )


def _chunk(items: list, size: int) -> list[list]:
    return [items[k : k + size] for k in range(0, len(items), size)]


def _pair_key(kind: ScorerKind, premise: str, hypothesis: str) -> CacheKey:
    return make_key(
        "nli", {"model": kind.model_id, "premise": premise, "hypothesis": hypothesis}
    )


def _embed_key(kind: ScorerKind, text: str) -> CacheKey:
    return make_key("embed", {"model": kind.model_id, "text": text})


def _canonical(obj: object) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def build_relevance_matrix(
    doc: SentenceDoc,
    summary: SentenceDoc,
    kind: ScorerKind,
    backend: object,
    cache: ResponseCache | None = None,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
) -> RelevanceMatrix:
    """Score every (document sentence, summary sentence) pair.

    Cache lookups happen per pair (per text for embeddings) so reruns
    with a warm cache issue no backend calls at all. Misses are scored
    in batches, dispatched concurrently up to ``max_in_flight``. Any
    backend failure aborts the whole matrix; no partial result leaks
    out, though completed batches stay cached.
    """
    rows, cols = len(doc), len(summary)
    if rows < 1 or cols < 1:
        raise ScoringError(
            f"need at least one sentence on each side, got {rows} document "
            f"and {cols} summary sentences"
        )
    if batch_size < 1:
        raise ScoringError(f"batch_size must be positive, got {batch_size}")

    if kind.variant is ScorerVariant.SIMILARITY:
        scores = _similarity_scores(doc, summary, kind, backend, cache, batch_size, max_in_flight)
    else:
        scores = _pair_scores(doc, summary, kind, backend, cache, batch_size, max_in_flight)
    return RelevanceMatrix(rows=rows, cols=cols, scores=tuple(scores), kind=kind)


def _pair_scores(
    doc: SentenceDoc,
    summary: SentenceDoc,
    kind: ScorerKind,
    backend: object,
    cache: ResponseCache | None,
    batch_size: int,
    max_in_flight: int,
) -> list[float]:
    d_texts = doc.texts
    s_texts = summary.texts
    total = len(d_texts) * len(s_texts)
    scores: list[float | None] = [None] * total

    misses: list[tuple[int, str, str]] = []
    for i, premise in enumerate(d_texts):
        for j, hypothesis in enumerate(s_texts):
            idx = i * len(s_texts) + j
            if cache is not None:
                raw = cache.get(_pair_key(kind, premise, hypothesis))
                if raw is not None:
                    scores[idx] = _pair_score_from_raw(kind, raw)
                    continue
            misses.append((idx, premise, hypothesis))

    if misses:
        batches = _chunk(misses, batch_size)

        def run(batch: list[tuple[int, str, str]]) -> list[tuple[int, str, str, float, bytes]]:
            pairs = [(p, h) for _, p, h in batch]
            if kind.variant is ScorerVariant.MOCK:
                values = backend.score_pairs(pairs)
                out = []
                for (idx, p, h), value in zip(batch, values):
                    out.append((idx, p, h, value, _canonical({"score": value})))
                return out
            model, probs = backend.nli(pairs)
            _check_model(kind, model)
            out = []
            for (idx, p, h), item in zip(batch, probs):
                raw = _canonical(
                    {
                        "contradiction": item.contradiction,
                        "entailment": item.entailment,
                        "neutral": item.neutral,
                    }
                )
                out.append((idx, p, h, net_entailment(item), raw))
            return out

        workers = max(1, min(max_in_flight, len(batches)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for done in pool.map(run, batches):
                for idx, premise, hypothesis, value, raw in done:
                    scores[idx] = value
                    if cache is not None:
                        cache.put(_pair_key(kind, premise, hypothesis), raw)

    return _finalize(scores)


def _pair_score_from_raw(kind: ScorerKind, raw: bytes) -> float:
    try:
        parsed = json.loads(raw.decode("utf-8"))
    except ValueError as exc:
        raise ProtocolError(f"corrupt cached scorer entry: {exc}") from exc
    if kind.variant is ScorerVariant.MOCK:
        try:
            value = float(parsed["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed cached mock score: {parsed!r}") from exc
        if not math.isfinite(value):
            raise ProtocolError(f"cached mock score is not finite: {value!r}")
        return value
    return net_entailment(_parse_nli_item(parsed))


def _similarity_scores(
    doc: SentenceDoc,
    summary: SentenceDoc,
    kind: ScorerKind,
    backend: object,
    cache: ResponseCache | None,
    batch_size: int,
    max_in_flight: int,
) -> list[float]:
    d_texts = doc.texts
    s_texts = summary.texts

    vectors: dict[str, list[float]] = {}
    order: list[str] = []
    for text in [*d_texts, *s_texts]:
        if text not in vectors:
            vectors[text] = []
            order.append(text)

    missing: list[str] = []
    for text in order:
        raw = cache.get(_embed_key(kind, text)) if cache is not None else None
        if raw is not None:
            vectors[text] = _vector_from_raw(raw)
        else:
            missing.append(text)

    if missing:
        batches = _chunk(missing, batch_size)

        def run(batch: list[str]) -> list[tuple[str, list[float]]]:
            model, vecs = backend.embed(batch)
            _check_model(kind, model)
            return list(zip(batch, vecs))

        workers = max(1, min(max_in_flight, len(batches)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for done in pool.map(run, batches):
                for text, vec in done:
                    vectors[text] = vec
                    if cache is not None:
                        cache.put(_embed_key(kind, text), _canonical(vec))

    dims = {len(v) for v in vectors.values()}
    if len(dims) != 1:
        raise ProtocolError(f"embedding dimensions are inconsistent: {sorted(dims)}")

    scores: list[float] = []
    for i, d_text in enumerate(d_texts):
        for j, s_text in enumerate(s_texts):
            try:
                scores.append(cosine_similarity(vectors[d_text], vectors[s_text]))
            except ScoringError as exc:
                raise ScoringError(
                    f"document sentence {i} vs summary sentence {j}: {exc}",
                    sentence_index=i,
                ) from exc
    return scores


def _vector_from_raw(raw: bytes) -> list[float]:
    try:
        parsed = json.loads(raw.decode("utf-8"))
    except ValueError as exc:
        raise ProtocolError(f"corrupt cached embedding entry: {exc}") from exc
    if not isinstance(parsed, list) or not parsed:
        raise ProtocolError(f"malformed cached embedding: {parsed!r}")
    return _parse_vector(parsed, len(parsed))


def _finalize(scores: list[float | None]) -> list[float]:
    out = []
    for value in scores:
        if value is None:
            raise ScoringError("internal error: matrix cell left unscored")
        if not math.isfinite(value):
            raise ProtocolError(f"relevance score is not finite: {value!r}")
        out.append(float(value))
    return out
