"""Command-line entry point.

Subcommands expose the pipeline at three granularities (filter, judge,
eval) plus a matrix diagnostic and cache maintenance. Every pipeline
command accepts the same scorer/filter/template/judge flags, so a
configuration can be rehearsed on one example before a full run.

Exit codes: 0 success, 1 configuration error, 2 transport or backend
error, 3 unparseable verdict (judge command only), 4 dataset or
content error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shlex
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cache import ResponseCache, default_cache_dir
from .corpus import BENCHMARKS, SPLITS, load_dataset, save_rejects
from .errors import (
    ConfigError,
    DatasetError,
    EmptyFilterError,
    HighErrorRateError,
    JudgeError,
    ProtocolError,
    RenderError,
    ScoringError,
    SifidError,
    TransportError,
    UndefinedMetricError,
)
from .evaluation import Backends, PipelineConfig, config_fingerprint, evaluate
from .filtering import EmptyFallback, FilterConfig, filter_document, max_pool_rows
from .judge import HttpJudge, JudgeConfig, MockJudge, VerdictLabel, parse_verdict, query_judge
from .prompting import TemplateBase, TemplateId, load_template, render_prompt
from .scorer import HttpScorer, MockScorer, ScorerKind, ScorerVariant, build_relevance_matrix
from .segmentation import load_abbreviations, split_sentences

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRANSPORT = 2
EXIT_UNPARSEABLE = 3
EXIT_DATA = 4

# Per-scorer threshold defaults; an explicit --beta always wins.
BETA_DEFAULTS = {"entailment": 0.0, "similarity": 0.5, "mock": 0.0, "none": 0.0}

SCORER_MODEL_DEFAULTS = {
    "entailment": "tals/albert-base-vitaminc-mnli",
    "similarity": "sentence-transformers/all-mpnet-base-v2",
    "mock": "mock",
}


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    scorer = p.add_argument_group("scorer")
    scorer.add_argument(
        "--scorer",
        choices=["entailment", "similarity", "mock", "none"],
        default="entailment",
        help="relevance scorer variant; 'none' sends the full document to the judge "
        "(default: %(default)s)",
    )
    scorer.add_argument(
        "--scorer-url",
        default=None,
        help="scoring service base URL (default: $SIFID_SCORER_URL)",
    )
    scorer.add_argument(
        "--scorer-model",
        default=None,
        help="model id the scoring service must report "
        f"(defaults: entailment={SCORER_MODEL_DEFAULTS['entailment']}, "
        f"similarity={SCORER_MODEL_DEFAULTS['similarity']})",
    )

    filt = p.add_argument_group("filter")
    filt.add_argument(
        "--beta",
        type=float,
        default=None,
        help="relevance threshold; sentences scoring strictly above it are kept "
        "(default: 0.0 for entailment, 0.5 for similarity)",
    )
    filt.add_argument(
        "--window",
        type=int,
        default=1,
        help="context window radius around each kept sentence (default: %(default)s)",
    )
    filt.add_argument(
        "--empty-fallback",
        choices=["full-doc", "error"],
        default="full-doc",
        help="what to do when nothing clears the threshold (default: %(default)s)",
    )
    filt.add_argument(
        "--abbrev-file",
        default=None,
        help="custom abbreviation list for sentence splitting (one token per line)",
    )

    tmpl = p.add_argument_group("template")
    tmpl.add_argument(
        "--template",
        choices=["generic", "polytope"],
        default="generic",
        help="prompt template (default: %(default)s)",
    )
    tmpl.add_argument(
        "--cot",
        action="store_true",
        help="ask for step-by-step reasoning before the final answer",
    )
    tmpl.add_argument(
        "--template-file",
        default=None,
        help="override the packaged template with a file (slots still required)",
    )

    judge = p.add_argument_group("judge")
    judge.add_argument(
        "--judge",
        choices=["http", "mock"],
        default="http",
        help="judge backend (default: %(default)s)",
    )
    judge.add_argument(
        "--judge-url",
        default=None,
        help="judge endpoint base URL (default: $SIFID_JUDGE_URL)",
    )
    judge.add_argument(
        "--judge-model",
        default=None,
        help="judge model id; required with --judge http (mock default: mock-judge)",
    )
    judge.add_argument(
        "--temperature",
        type=float,
        default=0.0,
        help="judge sampling temperature (default: %(default)s)",
    )
    judge.add_argument(
        "--max-output-tokens",
        type=int,
        default=512,
        help="judge completion token cap (default: %(default)s)",
    )
    judge.add_argument(
        "--unparseable-as",
        type=int,
        choices=[0, 1],
        default=0,
        help="binary label assigned to unparseable verdicts (default: %(default)s)",
    )
    judge.add_argument(
        "--mock-judge-reply",
        default="Yes",
        help="reply the mock judge gives when no rule matches (default: %(default)s)",
    )
    judge.add_argument(
        "--mock-judge-rules",
        default=None,
        help="JSON file of [substring, reply] rules for the mock judge",
    )

    misc = p.add_argument_group("run")
    misc.add_argument(
        "--cache-dir",
        default=None,
        help="response cache root (default: $SIFID_CACHE_DIR or ~/.cache/sifid)",
    )
    misc.add_argument(
        "--concurrency",
        type=int,
        default=4,
        help="max in-flight examples during eval (default: %(default)s)",
    )


def _resolve_scorer_kind(args: argparse.Namespace) -> ScorerKind | None:
    if args.scorer == "none":
        return None
    model = args.scorer_model or SCORER_MODEL_DEFAULTS[args.scorer]
    return ScorerKind(variant=ScorerVariant(args.scorer), model_id=model)


def _resolve_filter(args: argparse.Namespace) -> FilterConfig:
    beta = args.beta if args.beta is not None else BETA_DEFAULTS[args.scorer]
    fallback = (
        EmptyFallback.FULL_DOCUMENT
        if args.empty_fallback == "full-doc"
        else EmptyFallback.EMPTY_ERROR
    )
    return FilterConfig(beta=beta, window_radius=args.window, empty_fallback=fallback)


def _resolve_template(args: argparse.Namespace) -> TemplateId:
    return TemplateId(base=TemplateBase(args.template), cot=args.cot)


def _resolve_judge_config(args: argparse.Namespace) -> JudgeConfig:
    if args.judge == "mock":
        return JudgeConfig(
            model=args.judge_model or "mock-judge",
            endpoint_url=None,
            temperature=args.temperature,
            max_output_tokens=args.max_output_tokens,
            unparseable_maps_to=args.unparseable_as,
        )
    url = args.judge_url or os.environ.get("SIFID_JUDGE_URL")
    if not url:
        raise ConfigError(
            "judge endpoint not configured: pass --judge-url, set SIFID_JUDGE_URL, "
            "or choose --judge mock"
        )
    if not args.judge_model:
        raise ConfigError("--judge-model is required with --judge http")
    return JudgeConfig(
        model=args.judge_model,
        endpoint_url=url,
        temperature=args.temperature,
        max_output_tokens=args.max_output_tokens,
        unparseable_maps_to=args.unparseable_as,
    )


def _load_mock_rules(path: str | None) -> list[tuple[str, str]]:
    if path is None:
        return []
    try:
        parsed = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read mock judge rules {path}: {exc}") from exc
    if not isinstance(parsed, list):
        raise ConfigError(f"mock judge rules must be a JSON list, got {type(parsed).__name__}")
    rules = []
    for item in parsed:
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not all(isinstance(x, str) for x in item)
        ):
            raise ConfigError(f"each mock judge rule must be [substring, reply], got {item!r}")
        rules.append((item[0], item[1]))
    return rules


def _resolve_judge_backend(args: argparse.Namespace) -> object:
    if args.judge == "mock":
        return MockJudge(rules=_load_mock_rules(args.mock_judge_rules), default=args.mock_judge_reply)
    return HttpJudge()


def _resolve_scorer_backend(args: argparse.Namespace, kind: ScorerKind | None) -> object | None:
    if kind is None:
        return None
    if kind.variant is ScorerVariant.MOCK:
        return MockScorer()
    url = args.scorer_url or os.environ.get("SIFID_SCORER_URL")
    if not url:
        raise ConfigError(
            "scoring service not configured: pass --scorer-url, set SIFID_SCORER_URL, "
            "or choose --scorer mock"
        )
    return HttpScorer(url)


def _resolve_cache(args: argparse.Namespace) -> ResponseCache:
    root = args.cache_dir or default_cache_dir()
    return ResponseCache(root)


def _resolve_abbreviations(args: argparse.Namespace) -> frozenset[str] | None:
    if args.abbrev_file is None:
        return None
    try:
        return load_abbreviations(args.abbrev_file)
    except OSError as exc:
        raise ConfigError(f"cannot read abbreviation file {args.abbrev_file}: {exc}") from exc


def _read_input(path: str, what: str) -> str:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {what} file {path}: {exc}") from exc
    if not text.strip():
        raise DatasetError(f"{what} file {path} is empty")
    return text


def _filter_once(args: argparse.Namespace) -> tuple[str, list[int], float, bool]:
    """Shared filter stage for the filter and judge commands.

    Returns (filtered_text, kept_indices, removal_rate, fallback_used).
    """
    doc_text = _read_input(args.document, "document")
    kind = _resolve_scorer_kind(args)
    abbrevs = _resolve_abbreviations(args)
    doc = split_sentences(doc_text, abbrevs)
    if kind is None:
        return doc_text, list(range(len(doc))), 0.0, False
    summary_text = _read_input(args.summary, "summary")
    summary = split_sentences(summary_text, abbrevs)
    backend = _resolve_scorer_backend(args, kind)
    cache = _resolve_cache(args)
    matrix = build_relevance_matrix(doc, summary, kind, backend, cache)
    filtered = filter_document(doc, matrix, _resolve_filter(args))
    return (
        filtered.text,
        list(filtered.kept_indices),
        filtered.removal_rate,
        filtered.fallback_used,
    )


def cmd_filter(args: argparse.Namespace) -> int:
    text, kept, removal, fallback = _filter_once(args)
    print(f"kept_indices: {kept}")
    print(f"removal_rate: {removal}")
    if fallback:
        print("fallback: no sentence scored above beta; full document kept")
    print("filtered_text:")
    print(text)
    return EXIT_OK


def cmd_judge(args: argparse.Namespace) -> int:
    summary_text = _read_input(args.summary, "summary")
    filtered_text, _, removal, fallback = _filter_once(args)
    template = _resolve_template(args)
    judge_cfg = _resolve_judge_config(args)
    backend = _resolve_judge_backend(args)
    cache = _resolve_cache(args)
    prompt = render_prompt(template, filtered_text, summary_text, args.template_file)
    response = query_judge(prompt.text, judge_cfg, backend, cache)
    verdict = parse_verdict(response.text)
    print(f"label: {verdict.label.value}")
    print(f"matched_token: {verdict.matched_token}")
    print(f"removal_rate: {removal}")
    if fallback:
        print("fallback: no sentence scored above beta; full document kept")
    print(f"from_cache: {response.from_cache}")
    if verdict.label is VerdictLabel.UNPARSEABLE:
        return EXIT_UNPARSEABLE
    return EXIT_OK


def cmd_matrix(args: argparse.Namespace) -> int:
    kind = _resolve_scorer_kind(args)
    if kind is None:
        raise ConfigError("the matrix command needs a real scorer; --scorer none has no matrix")
    doc_text = _read_input(args.document, "document")
    summary_text = _read_input(args.summary, "summary")
    abbrevs = _resolve_abbreviations(args)
    doc = split_sentences(doc_text, abbrevs)
    summary = split_sentences(summary_text, abbrevs)
    backend = _resolve_scorer_backend(args, kind)
    cache = _resolve_cache(args)
    matrix = build_relevance_matrix(doc, summary, kind, backend, cache)
    pooled = max_pool_rows(matrix)
    if args.json:
        print(
            json.dumps(
                {
                    "rows": matrix.rows,
                    "cols": matrix.cols,
                    "matrix": matrix.to_rows(),
                    "pooled": list(pooled.values),
                },
                sort_keys=True,
            )
        )
        return EXIT_OK
    print(f"rows: {matrix.rows}")
    print(f"cols: {matrix.cols}")
    print(f"matrix: {matrix.to_rows()}")
    print(f"pooled: {list(pooled.values)}")
    return EXIT_OK


def _config_summary(cfg: PipelineConfig) -> dict:
    return {
        "scorer": None
        if cfg.scorer is None
        else {"variant": cfg.scorer.variant.value, "model": cfg.scorer.model_id},
        "filter": {
            "beta": cfg.filter.beta,
            "window_radius": cfg.filter.window_radius,
            "empty_fallback": cfg.filter.empty_fallback.value,
        },
        "template": {"base": cfg.template.base.value, "cot": cfg.template.cot},
        "judge": {
            "model": cfg.judge.model,
            "temperature": cfg.judge.temperature,
            "max_output_tokens": cfg.judge.max_output_tokens,
            "unparseable_maps_to": cfg.judge.unparseable_maps_to,
        },
        "concurrency": cfg.concurrency,
        "limit": cfg.limit,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _print_report(report) -> None:
    rows = [
        ("benchmark", report.benchmark),
        ("n_examples", report.n_examples),
        ("balanced_accuracy", report.balanced_accuracy),
        ("tpr", report.tpr),
        ("tnr", report.tnr),
        ("mean_removal_rate", report.mean_removal_rate),
        ("unparseable_count", report.unparseable_count),
        ("error_count", report.error_count),
        ("total_prompt_tokens", report.total_prompt_tokens),
        ("tokens_estimated", report.tokens_estimated),
        ("config_fingerprint", report.config_fingerprint),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")


def cmd_eval(args: argparse.Namespace) -> int:
    kind = _resolve_scorer_kind(args)
    cfg = PipelineConfig(
        scorer=kind,
        filter=_resolve_filter(args),
        template=_resolve_template(args),
        judge=_resolve_judge_config(args),
        concurrency=args.concurrency,
        limit=args.limit,
        template_file=args.template_file,
        abbreviations=_resolve_abbreviations(args),
    )
    backends = Backends(
        judge=_resolve_judge_backend(args),
        scorer=_resolve_scorer_backend(args, kind),
    )
    cache = _resolve_cache(args)

    dataset, rejects = load_dataset(args.data, args.benchmark, args.split)
    if not dataset.examples:
        raise DatasetError(
            f"dataset {args.data} has no usable examples ({len(rejects)} rejected)"
        )

    out_dir = Path(
        args.out
        or f"runs/{dataset.name}-{dataset.split}-{datetime.now(timezone.utc):%Y%m%dT%H%M%SZ}"
    )
    out_dir.mkdir(parents=True, exist_ok=True)

    template_text = load_template(cfg.template, cfg.template_file)
    manifest = {
        "command": "sifid " + " ".join(shlex.quote(a) for a in args.raw_argv),
        "version": __version__,
        "config": _config_summary(cfg),
        "config_fingerprint": config_fingerprint(cfg),
        "template_digest": hashlib.sha256(template_text.encode("utf-8")).hexdigest(),
        "dataset_digest": hashlib.sha256(Path(args.data).read_bytes()).hexdigest(),
        "dataset": {
            "path": str(args.data),
            "benchmark": dataset.name,
            "split": dataset.split,
            "n_examples": len(dataset.examples),
            "n_rejects": len(rejects),
        },
        "started_at": _utc_now(),
        "finished_at": None,
    }
    _write_json(out_dir / "manifest.json", manifest)
    save_rejects(rejects, out_dir / "rejects.jsonl")

    try:
        report, _ = evaluate(
            dataset,
            cfg,
            backends,
            cache,
            run_dir=out_dir,
            max_error_rate=args.max_error_rate,
        )
    finally:
        manifest["finished_at"] = _utc_now()
        _write_json(out_dir / "manifest.json", manifest)

    _print_report(report)
    scorer_calls = getattr(backends.scorer, "calls", 0) if backends.scorer else 0
    judge_calls = getattr(backends.judge, "calls", 0)
    print(f"backend_calls: scorer={scorer_calls} judge={judge_calls}")
    print(f"run_dir: {out_dir}")
    return EXIT_OK


def cmd_cache_clear(args: argparse.Namespace) -> int:
    root = args.cache_dir or default_cache_dir()
    cache = ResponseCache(root)
    cache.clear()
    print(f"cleared cache at {root}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sifid",
        description="Filter documents to summary-relevant sentences, then ask an "
        "LLM judge for a Yes/No factual-consistency verdict.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_filter = sub.add_parser(
        "filter", help="filter a document against a summary and print the kept text"
    )
    p_filter.add_argument("document", help="path to the document text file")
    p_filter.add_argument("summary", help="path to the summary text file")
    _add_shared_flags(p_filter)
    p_filter.set_defaults(func=cmd_filter)

    p_judge = sub.add_parser(
        "judge", help="run the full pipeline on one document/summary pair"
    )
    p_judge.add_argument("document", help="path to the document text file")
    p_judge.add_argument("summary", help="path to the summary text file")
    _add_shared_flags(p_judge)
    p_judge.set_defaults(func=cmd_judge)

    p_matrix = sub.add_parser(
        "matrix", help="print the raw relevance matrix and pooled scores"
    )
    p_matrix.add_argument("document", help="path to the document text file")
    p_matrix.add_argument("summary", help="path to the summary text file")
    p_matrix.add_argument("--json", action="store_true", help="emit one JSON object")
    _add_shared_flags(p_matrix)
    p_matrix.set_defaults(func=cmd_matrix)

    p_eval = sub.add_parser("eval", help="evaluate a benchmark dataset end to end")
    p_eval.add_argument("--data", required=True, help="path to the dataset JSONL file")
    p_eval.add_argument(
        "--benchmark",
        required=True,
        help=f"benchmark name: {', '.join(sorted(BENCHMARKS))}",
    )
    p_eval.add_argument(
        "--split", choices=list(SPLITS), default="validation", help="dataset split"
    )
    p_eval.add_argument("--limit", type=int, default=None, help="evaluate only the first N examples")
    p_eval.add_argument("--out", default=None, help="run directory (default: runs/<benchmark>-<stamp>)")
    p_eval.add_argument(
        "--max-error-rate",
        type=float,
        default=0.5,
        help="fail the run when the errored fraction exceeds this (default: %(default)s)",
    )
    _add_shared_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_cache = sub.add_parser("cache", help="cache maintenance")
    cache_sub = p_cache.add_subparsers(dest="cache_command", required=True)
    p_clear = cache_sub.add_parser("clear", help="delete every cached response")
    p_clear.add_argument(
        "--cache-dir",
        default=None,
        help="response cache root (default: $SIFID_CACHE_DIR or ~/.cache/sifid)",
    )
    p_clear.set_defaults(func=cmd_cache_clear)

    return parser


def main(argv: list[str] | None = None) -> int:
    raw_argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(raw_argv)
    args.raw_argv = raw_argv
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, ProtocolError, JudgeError, HighErrorRateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (DatasetError, EmptyFilterError, ScoringError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SifidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
