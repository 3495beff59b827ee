"""Factual-consistency detection for summarization.

The pipeline scores every (document sentence, summary sentence) pair,
keeps only document sentences relevant to the summary, and asks an LLM
judge for a Yes/No consistency verdict. An evaluation harness runs the
pipeline over labeled benchmarks and reports balanced accuracy.
"""

__version__ = "0.1.0"

from .corpus import Dataset, Example, Reject, load_dataset, save_dataset
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
from .evaluation import (
    Backends,
    EvalReport,
    ExampleResult,
    PipelineConfig,
    balanced_accuracy,
    detect,
    evaluate,
)
from .filtering import (
    EmptyFallback,
    FilterConfig,
    FilteredDocument,
    PooledScores,
    assemble_filtered,
    filter_document,
    max_pool_rows,
    select_indices,
)
from .judge import (
    HttpJudge,
    JudgeConfig,
    JudgeResponse,
    MockJudge,
    Verdict,
    VerdictLabel,
    parse_verdict,
    query_judge,
)
from .prompting import RenderedPrompt, TemplateBase, TemplateId, load_template, render_prompt
from .scorer import (
    HttpScorer,
    MockScorer,
    NliProbs,
    RelevanceMatrix,
    ScorerKind,
    ScorerVariant,
    build_relevance_matrix,
    cosine_similarity,
    net_entailment,
)
from .segmentation import Sentence, SentenceDoc, load_abbreviations, split_sentences

__all__ = [
    "__version__",
    "Backends",
    "ConfigError",
    "Dataset",
    "DatasetError",
    "EmptyFallback",
    "EmptyFilterError",
    "EvalReport",
    "Example",
    "ExampleResult",
    "FilterConfig",
    "FilteredDocument",
    "HighErrorRateError",
    "HttpJudge",
    "HttpScorer",
    "JudgeConfig",
    "JudgeError",
    "JudgeResponse",
    "MockJudge",
    "MockScorer",
    "NliProbs",
    "PipelineConfig",
    "PooledScores",
    "ProtocolError",
    "Reject",
    "RelevanceMatrix",
    "RenderError",
    "RenderedPrompt",
    "ScorerKind",
    "ScorerVariant",
    "ScoringError",
    "Sentence",
    "SentenceDoc",
    "SifidError",
    "TemplateBase",
    "TemplateId",
    "TransportError",
    "UndefinedMetricError",
    "Verdict",
    "VerdictLabel",
    "assemble_filtered",
    "balanced_accuracy",
    "build_relevance_matrix",
    "cosine_similarity",
    "detect",
    "evaluate",
    "filter_document",
    "load_abbreviations",
    "load_dataset",
    "load_template",
    "max_pool_rows",
    "net_entailment",
    "parse_verdict",
    "query_judge",
    "render_prompt",
    "save_dataset",
    "select_indices",
    "split_sentences",
]
