"""Benchmark dataset loading.

File format: line-delimited JSON, one record per line, with fields
``document`` (required), ``claim`` (required; ``summary`` accepted as an
alias), ``label`` (optional int, 1=consistent / 0=inconsistent), ``cut``
(optional split tag, ignored), ``id`` (optional). This matches the
publicly distributed SummaC benchmark files.

Label convention project-wide: 1 = consistent (positive class),
0 = inconsistent. Text is never normalized at load time, because
downstream score caches key on exact content.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DatasetError

BENCHMARKS = frozenset(
    {"cogensum", "xsumfaith", "polytope", "factcc", "summeval", "frank", "custom"}
)
_BENCHMARK_ALIASES = {"cogensumm": "cogensum"}
SPLITS = ("validation", "test")


@dataclass(frozen=True, slots=True)
class Example:
    """One document/summary pair, optionally gold-labeled."""

    id: str
    benchmark: str
    document: str
    summary: str
    gold_label: int | None = None


@dataclass(frozen=True, slots=True)
class Reject:
    """A skipped input line and why it was skipped."""

    line_no: int
    reason: str


@dataclass(frozen=True, slots=True)
class Dataset:
    """Examples in file order. Immutable; safe to share across threads."""

    name: str
    split: str
    examples: tuple[Example, ...]

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


def normalize_benchmark(name: str) -> str:
    low = name.strip().lower()
    low = _BENCHMARK_ALIASES.get(low, low)
    if low not in BENCHMARKS:
        known = ", ".join(sorted(BENCHMARKS))
        raise DatasetError(f"unknown benchmark {name!r}; expected one of: {known}")
    return low


def validate_example(e: Example) -> list[str]:
    """Return invariant violations as 'field: rule' strings; empty list when clean."""
    violations = []
    if not e.document.strip():
        violations.append("document: empty")
    if not e.summary.strip():
        violations.append("summary: empty")
    if e.gold_label is not None and e.gold_label not in (0, 1):
        violations.append("gold_label: not binary")
    return violations


def _parse_line(raw: str, line_no: int, benchmark: str, split: str) -> Example:
    try:
        record = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid json: {exc.msg}") from exc
    if not isinstance(record, dict):
        raise ValueError("record is not an object")

    document = record.get("document")
    summary = record.get("claim", record.get("summary"))
    if not isinstance(document, str):
        raise ValueError("document: missing or not a string")
    if not isinstance(summary, str):
        raise ValueError("claim: missing or not a string")

    label = record.get("label")
    if label is not None:
        # bools are ints in Python; reject them explicitly
        if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
            raise ValueError("label: not in {0, 1}")

    example_id = record.get("id")
    if example_id is None:
        example_id = f"{benchmark}:{split}:{line_no}"
    elif not isinstance(example_id, str):
        example_id = str(example_id)

    example = Example(
        id=example_id,
        benchmark=benchmark,
        document=document,
        summary=summary,
        gold_label=label,
    )
    violations = validate_example(example)
    if violations:
        raise ValueError("; ".join(violations))
    return example


def load_dataset(
    path: str | Path, benchmark: str, split: str
) -> tuple[Dataset, list[Reject]]:
    """Load a line-delimited record file, collecting per-line rejects.

    Line numbers are 1-based; auto-assigned ids are
    ``<benchmark>:<split>:<line_no>``. Blank lines are skipped silently.
    An unreadable file raises DatasetError; malformed lines are rejected
    and loading continues.
    """
    if split not in SPLITS:
        raise DatasetError(f"unknown split {split!r}; expected one of: {', '.join(SPLITS)}")
    benchmark = normalize_benchmark(benchmark)
    path = Path(path)
    try:
        raw = path.read_text("utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset file {path}: {exc}") from exc

    examples: list[Example] = []
    rejects: list[Reject] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            example = _parse_line(line, line_no, benchmark, split)
            if example.id in seen_ids:
                raise ValueError(f"id: duplicate {example.id!r}")
        except ValueError as exc:
            rejects.append(Reject(line_no=line_no, reason=str(exc)))
            continue
        seen_ids.add(example.id)
        examples.append(example)
    return Dataset(name=benchmark, split=split, examples=tuple(examples)), rejects


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Serialize back to the line-delimited file format (round-trip safe)."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in dataset:
            record: dict = {"id": e.id, "document": e.document, "claim": e.summary}
            if e.gold_label is not None:
                record["label"] = e.gold_label
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def save_rejects(rejects: list[Reject], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rejects:
            fh.write(json.dumps({"line_no": r.line_no, "reason": r.reason}) + "\n")
