"""End-to-end detection over a dataset, with balanced-accuracy reporting.

One example flows split -> score -> pool -> filter -> render -> judge ->
parse. The harness runs examples concurrently but aggregates in example-id
order, so concurrency never changes a reported number.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .cache import ResponseCache
from .corpus import Dataset, Example
from .errors import (
    ConfigError,
    DatasetError,
    HighErrorRateError,
    SifidError,
    UndefinedMetricError,
)
from .filtering import FilterConfig, FilteredDocument, filter_document
from .judge import JudgeConfig, Verdict, VerdictLabel, parse_verdict, query_judge, to_binary
from .prompting import TemplateId, load_template, render_prompt
from .scorer import ScorerKind, build_relevance_matrix
from .segmentation import split_sentences

DEFAULT_MAX_ERROR_RATE = 0.5


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """Everything that shapes one evaluation run.

    scorer=None is the unfiltered baseline: the judge sees the whole
    document and removal_rate is exactly 0.0.
    """

    scorer: ScorerKind | None
    filter: FilterConfig
    template: TemplateId
    judge: JudgeConfig
    concurrency: int = 4
    limit: int | None = None
    template_file: str | None = None
    abbreviations: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ConfigError(f"concurrency must be >= 1, got {self.concurrency}")
        if self.limit is not None and self.limit < 1:
            raise ConfigError(f"limit must be >= 1, got {self.limit}")


@dataclass(frozen=True, slots=True)
class Backends:
    """Live handles matching the configured scorer and judge."""

    judge: object
    scorer: object | None = None


@dataclass(frozen=True, slots=True)
class ExampleResult:
    id: str
    gold: int
    predicted: int | None
    verdict: Verdict | None
    removal_rate: float | None
    fallback_used: bool
    prompt_tokens: int | None
    tokens_estimated: bool
    wall_time: float
    from_cache: bool = False
    error: str | None = None

    @property
    def errored(self) -> bool:
        return self.error is not None


@dataclass(frozen=True, slots=True)
class EvalReport:
    benchmark: str
    config_fingerprint: str
    n_examples: int
    balanced_accuracy: float | None
    tpr: float | None
    tnr: float | None
    mean_removal_rate: float | None
    unparseable_count: int
    error_count: int
    total_prompt_tokens: int
    tokens_estimated: bool

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "config_fingerprint": self.config_fingerprint,
            "n_examples": self.n_examples,
            "balanced_accuracy": self.balanced_accuracy,
            "tpr": self.tpr,
            "tnr": self.tnr,
            "mean_removal_rate": self.mean_removal_rate,
            "unparseable_count": self.unparseable_count,
            "error_count": self.error_count,
            "total_prompt_tokens": self.total_prompt_tokens,
            "tokens_estimated": self.tokens_estimated,
        }


def confusion_rates(
    golds: Sequence[int], preds: Sequence[int]
) -> tuple[float, float]:
    """(TPR, TNR) with positive class = consistent(1)."""
    if len(golds) != len(preds):
        raise UndefinedMetricError(
            f"golds and preds differ in length: {len(golds)} vs {len(preds)}"
        )
    if not golds:
        raise UndefinedMetricError("cannot compute rates on empty label lists")
    for value in (*golds, *preds):
        if value not in (0, 1):
            raise UndefinedMetricError(f"labels must be 0 or 1, got {value!r}")
    tp = sum(1 for g, p in zip(golds, preds) if g == 1 and p == 1)
    fn = sum(1 for g, p in zip(golds, preds) if g == 1 and p == 0)
    tn = sum(1 for g, p in zip(golds, preds) if g == 0 and p == 0)
    fp = sum(1 for g, p in zip(golds, preds) if g == 0 and p == 1)
    if tp + fn == 0 or tn + fp == 0:
        raise UndefinedMetricError(
            "balanced accuracy is undefined: golds must contain both classes"
        )
    return tp / (tp + fn), tn / (tn + fp)


def balanced_accuracy(golds: Sequence[int], preds: Sequence[int]) -> float:
    """(TPR + TNR) / 2; raises rather than returning a silent 0 on
    single-class golds."""
    tpr, tnr = confusion_rates(golds, preds)
    return (tpr + tnr) / 2


def config_fingerprint(cfg: PipelineConfig) -> str:
    """Hash of every result-shaping setting.

    Transport details (endpoints, timeouts, retries) and concurrency are
    excluded: they must never change what a run reports.
    """
    template_text = load_template(cfg.template, cfg.template_file)
    template_digest = hashlib.sha256(template_text.encode("utf-8")).hexdigest()
    abbrev_digest = "default"
    if cfg.abbreviations is not None:
        joined = "\n".join(sorted(cfg.abbreviations)).encode("utf-8")
        abbrev_digest = hashlib.sha256(joined).hexdigest()
    payload = {
        "scorer": None
        if cfg.scorer is None
        else {"variant": cfg.scorer.variant.value, "model": cfg.scorer.model_id},
        "filter": {
            "beta": cfg.filter.beta,
            "window_radius": cfg.filter.window_radius,
            "empty_fallback": cfg.filter.empty_fallback.value,
        },
        "template": {
            "base": cfg.template.base.value,
            "cot": cfg.template.cot,
            "digest": template_digest,
        },
        "judge": {
            "model": cfg.judge.model,
            "temperature": cfg.judge.temperature,
            "max_output_tokens": cfg.judge.max_output_tokens,
            "unparseable_maps_to": cfg.judge.unparseable_maps_to,
        },
        "abbreviations": abbrev_digest,
        "limit": cfg.limit,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _filtered_for(
    example: Example,
    cfg: PipelineConfig,
    backends: Backends,
    cache: ResponseCache | None,
) -> FilteredDocument:
    if cfg.scorer is None:
        return FilteredDocument(
            kept_indices=(), text=example.document, removal_rate=0.0, fallback_used=False
        )
    if backends.scorer is None:
        raise ConfigError("scorer configured but no scorer backend supplied")
    doc = split_sentences(example.document, cfg.abbreviations)
    summary = split_sentences(example.summary, cfg.abbreviations)
    matrix = build_relevance_matrix(doc, summary, cfg.scorer, backends.scorer, cache)
    return filter_document(doc, matrix, cfg.filter)


def detect(
    example: Example,
    cfg: PipelineConfig,
    backends: Backends,
    cache: ResponseCache | None = None,
) -> ExampleResult:
    """Run the pipeline on one example.

    Any stage failure becomes an errored result rather than an
    exception, so one bad example never sinks a run. The prompt's
    summary slot always receives the original summary text; only the
    article side is filtered.
    """
    started = time.perf_counter()
    try:
        filtered = _filtered_for(example, cfg, backends, cache)
        prompt = render_prompt(
            cfg.template, filtered.text, example.summary, cfg.template_file
        )
        response = query_judge(prompt.text, cfg.judge, backends.judge, cache)
        verdict = parse_verdict(response.text)
        predicted = to_binary(verdict, cfg.judge.unparseable_maps_to)
        if response.usage is not None:
            prompt_tokens = response.usage.prompt_tokens
            estimated = False
        else:
            prompt_tokens = len(prompt.text.split())
            estimated = True
        return ExampleResult(
            id=example.id,
            gold=example.gold_label,
            predicted=predicted,
            verdict=verdict,
            removal_rate=filtered.removal_rate,
            fallback_used=filtered.fallback_used,
            prompt_tokens=prompt_tokens,
            tokens_estimated=estimated,
            wall_time=time.perf_counter() - started,
            from_cache=response.from_cache,
        )
    except SifidError as exc:
        return ExampleResult(
            id=example.id,
            gold=example.gold_label,
            predicted=None,
            verdict=None,
            removal_rate=None,
            fallback_used=False,
            prompt_tokens=None,
            tokens_estimated=False,
            wall_time=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )


def _result_line(r: ExampleResult) -> dict:
    verdict = None
    if r.verdict is not None:
        verdict = {
            "label": r.verdict.label.value,
            "matched_token": r.verdict.matched_token,
            "match_position": r.verdict.match_position,
        }
    return {
        "id": r.id,
        "gold": r.gold,
        "predicted": r.predicted,
        "verdict": verdict,
        "removal_rate": r.removal_rate,
        "fallback_used": r.fallback_used,
        "prompt_tokens": r.prompt_tokens,
        "tokens_estimated": r.tokens_estimated,
        "from_cache": r.from_cache,
        "wall_time": round(r.wall_time, 6),
        "error": r.error,
    }


def write_run_artifacts(
    run_dir: str | Path, report: EvalReport, results: Sequence[ExampleResult]
) -> None:
    """Persist report.json (deterministic bytes) and results.jsonl.

    report.json carries no timestamps or wall times, so two runs with
    the same config and cache state produce byte-identical files.
    """
    path = Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    report_bytes = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    (path / "report.json").write_text(report_bytes, encoding="utf-8")
    with open(path / "results.jsonl", "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(_result_line(r), sort_keys=True) + "\n")


def evaluate(
    dataset: Dataset,
    cfg: PipelineConfig,
    backends: Backends,
    cache: ResponseCache | None = None,
    run_dir: str | Path | None = None,
    max_error_rate: float = DEFAULT_MAX_ERROR_RATE,
) -> tuple[EvalReport, list[ExampleResult]]:
    """Detect over all (or the first ``limit``) examples and aggregate.

    Results are ordered by example id before any aggregation. When the
    error fraction exceeds ``max_error_rate`` the partial report is
    still persisted, then the run fails loudly.
    """
    if not dataset.examples:
        raise DatasetError(f"dataset {dataset.name}/{dataset.split} is empty")
    examples = dataset.examples
    if cfg.limit is not None:
        examples = examples[: cfg.limit]

    workers = min(cfg.concurrency, len(examples))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda ex: detect(ex, cfg, backends, cache), examples))
    results.sort(key=lambda r: r.id)

    ok = [r for r in results if not r.errored]
    error_count = len(results) - len(ok)
    fingerprint = config_fingerprint(cfg)

    ba = tpr = tnr = None
    error_rate = error_count / len(results)
    failing = error_rate > max_error_rate
    if ok:
        try:
            tpr, tnr = confusion_rates([r.gold for r in ok], [r.predicted for r in ok])
            ba = (tpr + tnr) / 2
        except UndefinedMetricError:
            # A failing run still persists whatever is computable; a
            # healthy run must not hide an undefined metric.
            if not failing:
                raise

    mean_removal = None
    if ok:
        mean_removal = sum(r.removal_rate for r in ok) / len(ok)

    report = EvalReport(
        benchmark=dataset.name,
        config_fingerprint=fingerprint,
        n_examples=len(results),
        balanced_accuracy=ba,
        tpr=tpr,
        tnr=tnr,
        mean_removal_rate=mean_removal,
        unparseable_count=sum(
            1 for r in ok if r.verdict is not None and r.verdict.label is VerdictLabel.UNPARSEABLE
        ),
        error_count=error_count,
        total_prompt_tokens=sum(r.prompt_tokens or 0 for r in ok),
        tokens_estimated=any(r.tokens_estimated for r in ok),
    )

    if run_dir is not None:
        write_run_artifacts(run_dir, report, results)

    if failing:
        raise HighErrorRateError(
            f"{error_count} of {len(results)} examples errored "
            f"(rate {error_rate:.2f}, allowed {max_error_rate:.2f})",
            report=report,
        )
    return report, results
