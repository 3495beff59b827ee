"""Rule-based sentence splitting with character-span bookkeeping.

The splitter is deliberately deterministic so that score caches and test
fixtures stay stable across platforms:

* a sentence ends at ``.``, ``!`` or ``?`` when the terminator is followed
  by whitespace and the next non-whitespace character is an uppercase
  letter, a digit, or a quote;
* a ``.`` whose surrounding token appears in the abbreviation list
  (``Dr.``, ``U.S.``, ``e.g.``, ...) never ends a sentence; matching is
  case-sensitive against the resource file;
* a blank line is a hard break: no sentence crosses it;
* overlong sentences (> 2000 chars) are kept intact and flagged with a
  warning instead of being force-wrapped, since cutting mid-sentence would
  corrupt downstream premise/hypothesis pairs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

_TERMINATORS = ".!?"
_QUOTE_CHARS = "\"'“”‘’"
_OPENERS = "\"'“‘([" # stripped from a token before the abbreviation lookup
_BLANK_LINE = re.compile(r"(?:[ \t\r]*\n){2,}")

LONG_SENTENCE_LIMIT = 2000


@dataclass(frozen=True, slots=True)
class Sentence:
    """One sentence with its half-open character span into the source text."""

    index: int
    text: str
    span: tuple[int, int]


@dataclass(frozen=True, slots=True)
class SentenceDoc:
    """A source text plus its ordered sentences.

    ``warnings`` collects non-fatal segmentation notes (e.g. overlong
    sentences kept intact).
    """

    source: str
    sentences: tuple[Sentence, ...]
    warnings: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]


def load_abbreviations(path: str | Path | None = None) -> frozenset[str]:
    """Read the abbreviation list, one token per line, '#' comments ignored."""
    if path is None:
        raw = resources.files("sifid.resources").joinpath("abbreviations.txt").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    tokens = set()
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            tokens.add(line)
    return frozenset(tokens)


_DEFAULT_ABBREVIATIONS = load_abbreviations()


def _blocks(text: str) -> list[tuple[int, int]]:
    """Half-open spans of paragraph blocks, split on blank lines."""
    blocks = []
    pos = 0
    for m in _BLANK_LINE.finditer(text):
        blocks.append((pos, m.start()))
        pos = m.end()
    blocks.append((pos, len(text)))
    return [(a, b) for a, b in blocks if text[a:b].strip()]


def _token_ending_at(text: str, i: int, block_start: int) -> str:
    """The maximal non-whitespace run ending at index i (inclusive)."""
    t = i
    while t > block_start and not text[t - 1].isspace():
        t -= 1
    return text[t : i + 1]


def _boundaries(text: str, start: int, end: int, abbreviations: frozenset[str]) -> list[int]:
    """Positions just after each sentence-ending terminator inside one block."""
    bounds = []
    for i in range(start, end):
        if text[i] not in _TERMINATORS:
            continue
        if i + 1 < end and text[i + 1] in _TERMINATORS:
            continue  # only the last terminator of a run can end the sentence
        j = i + 1
        if j >= end or not text[j].isspace():
            continue
        k = j
        while k < end and text[k].isspace():
            k += 1
        if k >= end:
            continue  # trailing whitespace; the block end closes the sentence
        nxt = text[k]
        if not (nxt.isupper() or nxt.isdigit() or nxt in _QUOTE_CHARS):
            continue
        if text[i] == ".":
            token = _token_ending_at(text, i, start)
            if token in abbreviations or token.lstrip(_OPENERS) in abbreviations:
                continue
        bounds.append(i + 1)
    return bounds


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> SentenceDoc:
    """Split ``text`` into sentences, preserving exact source spans.

    Empty or whitespace-only input yields a SentenceDoc with zero
    sentences; the caller decides whether that is an error.
    """
    abbrevs = _DEFAULT_ABBREVIATIONS if abbreviations is None else abbreviations
    sentences: list[Sentence] = []
    warnings: list[str] = []
    for block_start, block_end in _blocks(text):
        cut_points = _boundaries(text, block_start, block_end, abbrevs)
        seg_start = block_start
        for cut in cut_points + [block_end]:
            a, b = seg_start, cut
            while a < b and text[a].isspace():
                a += 1
            while b > a and text[b - 1].isspace():
                b -= 1
            if a < b:
                idx = len(sentences)
                sent_text = text[a:b]
                if len(sent_text) > LONG_SENTENCE_LIMIT:
                    warnings.append(
                        f"sentence {idx}: {len(sent_text)} chars exceeds "
                        f"{LONG_SENTENCE_LIMIT}, kept intact"
                    )
                sentences.append(Sentence(index=idx, text=sent_text, span=(a, b)))
            seg_start = cut
    return SentenceDoc(source=text, sentences=tuple(sentences), warnings=tuple(warnings))
