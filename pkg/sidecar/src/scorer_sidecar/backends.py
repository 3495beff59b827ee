"""Model backends.

Two families with the same duck-typed surface:

- offline backends compute deterministic scores from the text alone, so
  the service can be exercised (and contract-tested) with no checkpoint
  downloads;
- real backends load the configured NLI and sentence-embedding
  checkpoints, importing their heavy libraries only when instantiated.

NLI backends expose `model_id` and `predict(pairs) -> [(e, n, c), ...]`.
Embedding backends expose `model_id`, `dim`, and
`predict(texts) -> [vector, ...]`.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

OFFLINE_NLI_MODEL = "offline/lexical-nli"
OFFLINE_EMBED_MODEL = "offline/hash-embed-32"

_WORD = re.compile(r"[a-z0-9]+")


class BackendError(RuntimeError):
    """A model failed to load or to score a batch."""


def _tokens(text: str) -> set[str]:
    return set(_WORD.findall(text.lower()))


@dataclass(frozen=True, slots=True)
class LexicalNliBackend:
    """Word-overlap stand-in for an NLI model.

    Entailment mass grows with the fraction of hypothesis words present
    in the premise; contradiction mass takes the complement; neutral is a
    fixed floor. Values are normalized so the triple always sums to 1.
    """

    model_id: str = OFFLINE_NLI_MODEL

    def predict(self, pairs: list[tuple[str, str]]) -> list[tuple[float, float, float]]:
        results = []
        for premise, hypothesis in pairs:
            hyp = _tokens(hypothesis)
            coverage = len(hyp & _tokens(premise)) / len(hyp) if hyp else 0.0
            e_raw = 0.05 + 0.9 * coverage
            c_raw = 0.05 + 0.9 * (1.0 - coverage)
            n_raw = 0.25
            total = e_raw + n_raw + c_raw
            results.append((e_raw / total, n_raw / total, c_raw / total))
        return results


@dataclass(frozen=True, slots=True)
class HashEmbedBackend:
    """Unit vectors derived from a hash of the text.

    Identical inputs always map to identical vectors; unrelated inputs
    land in effectively random directions.
    """

    model_id: str = OFFLINE_EMBED_MODEL
    dim: int = 32

    def predict(self, texts: list[str]) -> list[list[float]]:
        return [self._vector(text) for text in texts]

    def _vector(self, text: str) -> list[float]:
        needed = self.dim * 2
        stream = b""
        block = hashlib.sha256(text.encode("utf-8")).digest()
        while len(stream) < needed:
            stream += block
            block = hashlib.sha256(block).digest()
        values = [
            float(int.from_bytes(stream[2 * i : 2 * i + 2], "big") - 32768)
            for i in range(self.dim)
        ]
        norm = sum(v * v for v in values) ** 0.5
        if norm == 0.0:
            values[0] = 1.0
            norm = 1.0
        return [v / norm for v in values]


@dataclass(slots=True)
class TransformersNliBackend:
    """Sequence-classification NLI checkpoint served via transformers."""

    model_id: str
    _tokenizer: object = field(init=False, repr=False)
    _model: object = field(init=False, repr=False)
    _order: tuple[int, int, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        try:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:
            raise BackendError(
                f"NLI backend requires torch and transformers: {exc}"
            ) from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(self.model_id)
            self._model = AutoModelForSequenceClassification.from_pretrained(self.model_id)
        except Exception as exc:
            raise BackendError(f"cannot load NLI model {self.model_id}: {exc}") from exc
        self._model.eval()
        torch.set_grad_enabled(False)
        self._order = self._label_order()

    def _label_order(self) -> tuple[int, int, int]:
        id2label = getattr(self._model.config, "id2label", {}) or {}
        found = {}
        for idx, label in id2label.items():
            name = str(label).lower()
            for role in ("entail", "neutral", "contra"):
                if role in name:
                    found[role] = int(idx)
        missing = [role for role in ("entail", "neutral", "contra") if role not in found]
        if missing:
            raise BackendError(
                f"model {self.model_id} labels {sorted(map(str, id2label.values()))!r} "
                f"do not cover {missing}"
            )
        return found["entail"], found["neutral"], found["contra"]

    def predict(self, pairs: list[tuple[str, str]]) -> list[tuple[float, float, float]]:
        import torch

        premises = [p for p, _ in pairs]
        hypotheses = [h for _, h in pairs]
        try:
            encoded = self._tokenizer(
                premises,
                hypotheses,
                padding=True,
                truncation=True,
                max_length=512,
                return_tensors="pt",
            )
            with torch.no_grad():
                logits = self._model(**encoded).logits
            probs = torch.softmax(logits, dim=-1)
        except Exception as exc:
            raise BackendError(f"NLI inference failed: {exc}") from exc
        e_idx, n_idx, c_idx = self._order
        return [
            (float(row[e_idx]), float(row[n_idx]), float(row[c_idx]))
            for row in probs
        ]


@dataclass(slots=True)
class SentenceEmbedBackend:
    """Sentence-embedding checkpoint served via sentence-transformers."""

    model_id: str
    dim: int = field(init=False)
    _model: object = field(init=False, repr=False)

    def __post_init__(self) -> None:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise BackendError(
                f"embedding backend requires sentence-transformers: {exc}"
            ) from exc
        try:
            self._model = SentenceTransformer(self.model_id)
        except Exception as exc:
            raise BackendError(f"cannot load embedding model {self.model_id}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def predict(self, texts: list[str]) -> list[list[float]]:
        try:
            vectors = self._model.encode(
                list(texts), convert_to_numpy=True, show_progress_bar=False
            )
        except Exception as exc:
            raise BackendError(f"embedding inference failed: {exc}") from exc
        return [[float(x) for x in row] for row in vectors]


def build_backends(config, offline: bool):
    """Instantiate the (nli, embed) backend pair for a config."""
    if offline:
        return LexicalNliBackend(), HashEmbedBackend()
    return (
        TransformersNliBackend(config.nli_model_id),
        SentenceEmbedBackend(config.embed_model_id),
    )
