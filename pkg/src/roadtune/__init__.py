"""roadtune: build road-safety instruction datasets and evaluate tuned models.

The pieces, in pipeline order: normalize text, ingest source guidebooks into
instruction records, expand them through a chat endpoint with near-duplicate
filtering, plan a layer-freeze fine-tune, and score system answers against
references with a family of overlap and embedding metrics.
"""

from .dataset import (
    InstructionRecord,
    Provenance,
    RecordDefaults,
    SourceTag,
    TaskType,
    dataset_stats,
    load_dataset,
    record_id,
    save_dataset,
    split_dataset,
    validate_record,
)
from .errors import (
    ConfigError,
    DataError,
    EndpointError,
    GenerationShortfallError,
    InvalidArgumentError,
    InvalidManifestError,
    ParseError,
    ProviderError,
    RoadtuneError,
    TransientEndpointError,
)
from .generate import (
    GenerationConfig,
    build_prompt,
    dedup_filter,
    generate_dataset,
    parse_generations,
)
from .harness import (
    EvalItem,
    EvalReport,
    HarnessConfig,
    SystemOutput,
    aggregate,
    collect_outputs,
    load_eval_items,
    load_system_outputs,
    render_report,
    run_eval,
)
from .ingest import (
    GuidebookEntry,
    entries_to_records,
    parse_guidebook,
    template_question,
)
from .metrics import (
    EmbeddingMatrix,
    MetricConfig,
    PrfTriple,
    ScoreSet,
    bertscore,
    bleu,
    clipped_match_count,
    lcs_length,
    rouge_l,
    rouge_n,
    score_pair,
    word_count,
)
from .text_norm import NormalizationConfig, ngrams, tokenize
from .train_plan import (
    FreezePlan,
    FreezePolicy,
    LayerEntry,
    LayerKind,
    LayerManifest,
    TrainConfig,
    emit_config,
    load_manifest,
    plan_freeze,
    serialize_config,
    verify_freeze,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # text
    "NormalizationConfig",
    "tokenize",
    "ngrams",
    # metrics
    "MetricConfig",
    "PrfTriple",
    "ScoreSet",
    "EmbeddingMatrix",
    "bleu",
    "rouge_n",
    "rouge_l",
    "lcs_length",
    "bertscore",
    "word_count",
    "clipped_match_count",
    "score_pair",
    # dataset
    "TaskType",
    "SourceTag",
    "Provenance",
    "InstructionRecord",
    "RecordDefaults",
    "record_id",
    "validate_record",
    "load_dataset",
    "save_dataset",
    "dataset_stats",
    "split_dataset",
    # ingest
    "GuidebookEntry",
    "parse_guidebook",
    "template_question",
    "entries_to_records",
    # generation
    "GenerationConfig",
    "build_prompt",
    "parse_generations",
    "dedup_filter",
    "generate_dataset",
    # train plan
    "LayerKind",
    "LayerEntry",
    "LayerManifest",
    "FreezePolicy",
    "FreezePlan",
    "TrainConfig",
    "load_manifest",
    "plan_freeze",
    "emit_config",
    "serialize_config",
    "verify_freeze",
    # harness
    "EvalItem",
    "SystemOutput",
    "HarnessConfig",
    "EvalReport",
    "run_eval",
    "aggregate",
    "render_report",
    "collect_outputs",
    "load_eval_items",
    "load_system_outputs",
    # errors
    "RoadtuneError",
    "InvalidArgumentError",
    "DataError",
    "ParseError",
    "ConfigError",
    "InvalidManifestError",
    "ProviderError",
    "EndpointError",
    "TransientEndpointError",
    "GenerationShortfallError",
]
