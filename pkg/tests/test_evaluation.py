"""Pipeline orchestration and balanced-accuracy tests."""

import json
import random
from pathlib import Path

import pytest

from sifid.cache import ResponseCache
from sifid.corpus import Dataset, Example, load_dataset
from sifid.errors import (
    ConfigError,
    DatasetError,
    HighErrorRateError,
    TransportError,
    UndefinedMetricError,
)
from sifid.evaluation import (
    Backends,
    PipelineConfig,
    balanced_accuracy,
    config_fingerprint,
    confusion_rates,
    detect,
    evaluate,
)
from sifid.filtering import EmptyFallback, FilterConfig
from sifid.judge import JudgeConfig, MockJudge, VerdictLabel
from sifid.prompting import TemplateBase, TemplateId
from sifid.scorer import MockScorer, ScorerKind, ScorerVariant

DATASET = Path(__file__).parent / "fixtures" / "datasets" / "synthetic4.jsonl"

MOCK_KIND = ScorerKind(variant=ScorerVariant.MOCK, model_id="mock")

JUDGE_RULES = [
    ("KEYSTONE", "Yes"),
    ("UNDECIDABLE", "I cannot determine this."),
    ("FABRICATED", "The answer is No."),
]


def mock_judge():
    return MockJudge(rules=list(JUDGE_RULES), default="No")


def pipeline_config(**kw):
    defaults = dict(
        scorer=MOCK_KIND,
        filter=FilterConfig(beta=0.0, window_radius=1),
        template=TemplateId(TemplateBase.GENERIC),
        judge=JudgeConfig(model="mock-judge"),
    )
    defaults.update(kw)
    return PipelineConfig(**defaults)


def load_synthetic():
    dataset, rejects = load_dataset(DATASET, "custom", "validation")
    assert rejects == []
    return dataset


class FailingJudge:
    """Judge backend that fails unless the prompt carries a marker."""

    def __init__(self, marker="KEYSTONE"):
        self.marker = marker
        self.calls = 0

    def complete(self, prompt, config):
        self.calls += 1
        if self.marker in prompt:
            body = json.dumps({"choices": [{"message": {"content": "Yes"}}]})
            return body.encode(), 0
        raise TransportError("injected judge outage")


class TestBalancedAccuracy:
    def test_pinned_fixture(self):
        assert balanced_accuracy([1, 1, 0, 0], [1, 0, 0, 0]) == 0.75

    def test_perfect_classifier(self):
        assert balanced_accuracy([1, 0, 1, 0], [1, 0, 1, 0]) == 1.0

    def test_degenerate_all_positive_classifier(self):
        assert balanced_accuracy([1, 0], [1, 1]) == 0.5

    def test_confusion_rates_fixture(self):
        tpr, tnr = confusion_rates([1, 1, 0, 0], [1, 0, 0, 0])
        assert (tpr, tnr) == (0.5, 1.0)

    def test_single_class_golds_rejected(self):
        with pytest.raises(UndefinedMetricError):
            balanced_accuracy([1, 1, 1], [1, 0, 1])
        with pytest.raises(UndefinedMetricError):
            balanced_accuracy([0, 0], [0, 0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(UndefinedMetricError):
            balanced_accuracy([1, 0], [1])

    def test_empty_rejected(self):
        with pytest.raises(UndefinedMetricError):
            balanced_accuracy([], [])

    def test_non_binary_values_rejected(self):
        with pytest.raises(UndefinedMetricError):
            balanced_accuracy([1, 2], [1, 0])
        with pytest.raises(UndefinedMetricError):
            balanced_accuracy([1, 0], [1, None])

    def test_oracle_equivalence_on_random_vectors(self):
        rng = random.Random(4242)
        checked = 0
        while checked < 300:
            n = rng.randrange(2, 60)
            golds = [rng.randrange(2) for _ in range(n)]
            if len(set(golds)) < 2:
                continue
            preds = [rng.randrange(2) for _ in range(n)]
            # independent formulation: average of per-class accuracies
            pos = [p for g, p in zip(golds, preds) if g == 1]
            neg = [p for g, p in zip(golds, preds) if g == 0]
            expected = (sum(pos) / len(pos) + (len(neg) - sum(neg)) / len(neg)) / 2
            assert abs(balanced_accuracy(golds, preds) - expected) <= 1e-12
            checked += 1


class TestDetect:
    def test_keystone_example_filters_to_window(self):
        dataset = load_synthetic()
        judge = mock_judge()
        cfg = pipeline_config()
        result = detect(dataset.examples[0], cfg, Backends(judge=judge, scorer=MockScorer()))
        assert result.error is None
        assert result.predicted == 1
        assert result.removal_rate == 0.7
        assert result.fallback_used is False
        # the judge saw exactly the three-sentence window, not the whole document
        prompt = judge.prompts[0]
        doc_sentences = dataset.examples[0].document.split(". ")
        assert "KEYSTONE" in prompt
        assert doc_sentences[0] not in prompt

    def test_raised_beta_falls_back_to_full_document(self):
        dataset = load_synthetic()
        judge = mock_judge()
        cfg = pipeline_config(filter=FilterConfig(beta=2.0, window_radius=1))
        result = detect(dataset.examples[0], cfg, Backends(judge=judge, scorer=MockScorer()))
        assert result.fallback_used is True
        assert result.removal_rate == 0.0
        assert result.predicted == 1
        assert dataset.examples[0].document in judge.prompts[0]

    def test_raised_beta_with_error_policy(self):
        dataset = load_synthetic()
        cfg = pipeline_config(
            filter=FilterConfig(
                beta=2.0, window_radius=1, empty_fallback=EmptyFallback.EMPTY_ERROR
            )
        )
        result = detect(
            dataset.examples[0], cfg, Backends(judge=mock_judge(), scorer=MockScorer())
        )
        assert result.error is not None
        assert "EmptyFilterError" in result.error
        assert result.predicted is None

    def test_unfiltered_baseline_sends_whole_document(self):
        dataset = load_synthetic()
        judge = mock_judge()
        cfg = pipeline_config(scorer=None)
        result = detect(dataset.examples[0], cfg, Backends(judge=judge))
        assert result.removal_rate == 0.0
        assert result.fallback_used is False
        assert dataset.examples[0].document in judge.prompts[0]

    def test_unparseable_reply_maps_per_config(self):
        dataset = load_synthetic()
        cfg = pipeline_config()
        result = detect(
            dataset.examples[1], cfg, Backends(judge=mock_judge(), scorer=MockScorer())
        )
        assert result.verdict.label is VerdictLabel.UNPARSEABLE
        assert result.predicted == 0

        cfg_flip = pipeline_config(judge=JudgeConfig(model="mock-judge", unparseable_maps_to=1))
        result = detect(
            dataset.examples[1], cfg_flip, Backends(judge=mock_judge(), scorer=MockScorer())
        )
        assert result.predicted == 1

    def test_judge_outage_becomes_errored_result(self):
        dataset = load_synthetic()
        cfg = pipeline_config()
        result = detect(
            dataset.examples[3], cfg, Backends(judge=FailingJudge(), scorer=MockScorer())
        )
        assert result.error is not None
        assert "TransportError" in result.error

    def test_scorer_configured_but_backend_missing(self):
        dataset = load_synthetic()
        cfg = pipeline_config()
        result = detect(dataset.examples[0], cfg, Backends(judge=mock_judge()))
        assert result.error is not None
        assert "ConfigError" in result.error

    def test_usage_present_means_exact_tokens(self):
        dataset = load_synthetic()
        judge = mock_judge()
        cfg = pipeline_config()
        result = detect(dataset.examples[0], cfg, Backends(judge=judge, scorer=MockScorer()))
        assert result.tokens_estimated is False
        assert result.prompt_tokens == len(judge.prompts[0].split())

    def test_usage_absent_means_estimated_tokens(self):
        dataset = load_synthetic()
        judge = MockJudge(rules=list(JUDGE_RULES), default="No", include_usage=False)
        cfg = pipeline_config()
        result = detect(dataset.examples[0], cfg, Backends(judge=judge, scorer=MockScorer()))
        assert result.tokens_estimated is True
        assert result.prompt_tokens == len(judge.prompts[0].split())


class TestPipelineConfigValidation:
    def test_zero_concurrency_rejected(self):
        with pytest.raises(ConfigError):
            pipeline_config(concurrency=0)

    def test_zero_limit_rejected(self):
        with pytest.raises(ConfigError):
            pipeline_config(limit=0)


class TestEvaluate:
    def test_synthetic_end_to_end(self, tmp_path):
        dataset = load_synthetic()
        cfg = pipeline_config()
        report, results = evaluate(
            dataset,
            cfg,
            Backends(judge=mock_judge(), scorer=MockScorer()),
            run_dir=tmp_path / "run",
        )
        assert [r.gold for r in results] == [1, 1, 0, 0]
        assert [r.predicted for r in results] == [1, 0, 0, 0]
        assert report.balanced_accuracy == 0.75
        assert report.tpr == 0.5
        assert report.tnr == 1.0
        assert report.mean_removal_rate == (0.7 + 0.4 + 0.5 + 0.0) / 4
        assert report.unparseable_count == 1
        assert report.error_count == 0
        assert report.n_examples == 4
        assert report.tokens_estimated is False
        assert report.total_prompt_tokens == sum(r.prompt_tokens for r in results)

    def test_limit_takes_first_examples_in_file_order(self):
        dataset = load_synthetic()
        cfg = pipeline_config(limit=2)
        # both remaining examples are gold=1, so the metric is undefined:
        # the harness must say so rather than reporting
        with pytest.raises(UndefinedMetricError):
            evaluate(dataset, cfg, Backends(judge=mock_judge(), scorer=MockScorer()))

    def test_limit_two_on_mixed_golds(self):
        dataset = load_synthetic()
        reordered = Dataset(
            name=dataset.name,
            split=dataset.split,
            examples=(dataset.examples[0], dataset.examples[2], dataset.examples[1]),
        )
        cfg = pipeline_config(limit=2)
        report, results = evaluate(
            reordered, cfg, Backends(judge=mock_judge(), scorer=MockScorer())
        )
        assert report.n_examples == 2
        assert {r.id for r in results} == {"ex1", "ex3"}

    def test_permutation_invariance(self):
        dataset = load_synthetic()
        shuffled = Dataset(
            name=dataset.name,
            split=dataset.split,
            examples=tuple(reversed(dataset.examples)),
        )
        cfg = pipeline_config()
        a, results_a = evaluate(dataset, cfg, Backends(judge=mock_judge(), scorer=MockScorer()))
        b, results_b = evaluate(shuffled, cfg, Backends(judge=mock_judge(), scorer=MockScorer()))
        assert a == b
        assert [r.id for r in results_a] == [r.id for r in results_b]

    def test_results_ordered_by_id_regardless_of_input_order(self):
        examples = tuple(
            Example(
                id=name,
                benchmark="custom",
                document="The keystone holds. Extra filler text.",
                summary="A keystone question?" if gold else "Unrelated comparison.",
                gold_label=gold,
            )
            for name, gold in [("zz", 1), ("aa", 0), ("mm", 1), ("bb", 0)]
        )
        dataset = Dataset(name="custom", split="validation", examples=examples)
        cfg = pipeline_config(concurrency=4)
        _, results = evaluate(dataset, cfg, Backends(judge=mock_judge(), scorer=MockScorer()))
        assert [r.id for r in results] == ["aa", "bb", "mm", "zz"]

    def test_concurrency_does_not_change_the_report(self):
        dataset = load_synthetic()
        serial, _ = evaluate(
            dataset, pipeline_config(concurrency=1),
            Backends(judge=mock_judge(), scorer=MockScorer()),
        )
        parallel, _ = evaluate(
            dataset, pipeline_config(concurrency=8),
            Backends(judge=mock_judge(), scorer=MockScorer()),
        )
        assert serial == parallel

    def test_unfiltered_baseline_rates(self):
        dataset = load_synthetic()
        cfg = pipeline_config(scorer=None)
        _, results = evaluate(dataset, cfg, Backends(judge=mock_judge()))
        for r in results:
            assert r.removal_rate == 0.0
            assert r.fallback_used is False

    def test_error_majority_fails_loudly_with_partial_report(self, tmp_path):
        dataset = load_synthetic()
        cfg = pipeline_config()
        run_dir = tmp_path / "run"
        with pytest.raises(HighErrorRateError) as err:
            evaluate(
                dataset,
                cfg,
                Backends(judge=FailingJudge(), scorer=MockScorer()),
                run_dir=run_dir,
            )
        # only ex1 carries the marker; the other three errored
        assert err.value.report.error_count == 3
        persisted = json.loads((run_dir / "report.json").read_text())
        assert persisted["error_count"] == 3
        assert persisted["balanced_accuracy"] is None

    def test_empty_dataset_rejected(self):
        dataset = Dataset(name="custom", split="validation", examples=())
        with pytest.raises(DatasetError):
            evaluate(dataset, pipeline_config(), Backends(judge=mock_judge(), scorer=MockScorer()))

    def test_warm_cache_rerun_is_bit_identical_with_zero_calls(self, tmp_path):
        dataset = load_synthetic()
        cfg = pipeline_config()
        cache = ResponseCache(tmp_path / "cache")
        evaluate(
            dataset,
            cfg,
            Backends(judge=mock_judge(), scorer=MockScorer()),
            cache,
            run_dir=tmp_path / "cold",
        )
        warm_judge = mock_judge()
        warm_scorer = MockScorer()
        evaluate(
            dataset,
            cfg,
            Backends(judge=warm_judge, scorer=warm_scorer),
            cache,
            run_dir=tmp_path / "warm",
        )
        assert warm_judge.calls == 0
        assert warm_scorer.calls == 0
        cold_bytes = (tmp_path / "cold" / "report.json").read_bytes()
        warm_bytes = (tmp_path / "warm" / "report.json").read_bytes()
        assert cold_bytes == warm_bytes

    def test_results_jsonl_contents(self, tmp_path):
        dataset = load_synthetic()
        cfg = pipeline_config()
        evaluate(
            dataset,
            cfg,
            Backends(judge=mock_judge(), scorer=MockScorer()),
            run_dir=tmp_path / "run",
        )
        lines = [
            json.loads(l)
            for l in (tmp_path / "run" / "results.jsonl").read_text().splitlines()
        ]
        assert [l["id"] for l in lines] == ["ex1", "ex2", "ex3", "ex4"]
        assert lines[1]["verdict"]["label"] == "unparseable"
        assert lines[3]["fallback_used"] is True
        for line in lines:
            assert "wall_time" in line


class TestFingerprint:
    def test_stable_across_calls(self):
        cfg = pipeline_config()
        assert config_fingerprint(cfg) == config_fingerprint(cfg)

    def test_sensitive_to_beta(self):
        a = config_fingerprint(pipeline_config())
        b = config_fingerprint(pipeline_config(filter=FilterConfig(beta=0.1)))
        assert a != b

    def test_sensitive_to_template_and_cot(self):
        a = config_fingerprint(pipeline_config())
        b = config_fingerprint(pipeline_config(template=TemplateId(TemplateBase.POLYTOPE)))
        c = config_fingerprint(
            pipeline_config(template=TemplateId(TemplateBase.GENERIC, cot=True))
        )
        assert len({a, b, c}) == 3

    def test_sensitive_to_model_ids(self):
        a = config_fingerprint(pipeline_config())
        b = config_fingerprint(
            pipeline_config(judge=JudgeConfig(model="another-judge"))
        )
        kind = ScorerKind(variant=ScorerVariant.ENTAILMENT, model_id="some-nli")
        c = config_fingerprint(pipeline_config(scorer=kind))
        assert len({a, b, c}) == 3

    def test_insensitive_to_concurrency_and_endpoints(self):
        a = config_fingerprint(pipeline_config(concurrency=1))
        b = config_fingerprint(pipeline_config(concurrency=32))
        assert a == b
        with_url = pipeline_config(
            judge=JudgeConfig(model="mock-judge", endpoint_url="http://elsewhere")
        )
        assert config_fingerprint(with_url) == a

    def test_matches_report_fingerprint(self):
        dataset = load_synthetic()
        cfg = pipeline_config()
        report, _ = evaluate(dataset, cfg, Backends(judge=mock_judge(), scorer=MockScorer()))
        assert report.config_fingerprint == config_fingerprint(cfg)
