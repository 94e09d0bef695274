"""Resume dataset construction, LLM-backed parsing, and model evaluation."""

__version__ = "0.1.0"

from .dataset import (
    DatasetBundle,
    LoraTrainingConfig,
    SourceDocument,
    export_bundle,
    export_instruction_jsonl,
    merge,
    split,
)
from .errors import (
    ConfigError,
    DataError,
    ExtractionError,
    GatewayError,
    ResumekitError,
    TransportError,
)
from .evaluator import (
    AggregateReport,
    Comparison,
    ModelRow,
    compare,
    evaluate_model,
    improvement,
    load_test_split,
    write_reports,
)
from .llm_gateway import (
    ChatCompletionClient,
    EndpointConfig,
    OfflineEmbedder,
    cosine_similarity,
    parse_resume,
    repair_json,
)
from .metrics import (
    SampleScore,
    bleu4_smoothed,
    exact_match,
    levenshtein_ratio,
    overall_similarity,
    rouge_combined,
    score_sample,
    semantic_f1,
)
from .normalize import (
    NormalizationReport,
    SkillAliasMap,
    default_alias_map,
    fill_missing,
    load_alias_map,
    normalize_date,
    normalize_record,
    unify_skills,
)
from .schema import (
    EducationEntry,
    ExperienceEntry,
    FlatView,
    ResumeRecord,
    SchemaError,
    canonical_serialize,
    flatten,
    parse_record,
    validate,
)
from .synth import SynthBatchSpec, SynthProfile, generate_batch, generate_resume, render_resume_text

__all__ = [
    "__version__",
    "AggregateReport",
    "ChatCompletionClient",
    "Comparison",
    "ConfigError",
    "DataError",
    "DatasetBundle",
    "EducationEntry",
    "EndpointConfig",
    "ExperienceEntry",
    "ExtractionError",
    "FlatView",
    "GatewayError",
    "LoraTrainingConfig",
    "ModelRow",
    "NormalizationReport",
    "OfflineEmbedder",
    "ResumeRecord",
    "ResumekitError",
    "SampleScore",
    "SchemaError",
    "SkillAliasMap",
    "SourceDocument",
    "SynthBatchSpec",
    "SynthProfile",
    "TransportError",
    "bleu4_smoothed",
    "canonical_serialize",
    "compare",
    "cosine_similarity",
    "default_alias_map",
    "evaluate_model",
    "exact_match",
    "export_bundle",
    "export_instruction_jsonl",
    "fill_missing",
    "flatten",
    "generate_batch",
    "generate_resume",
    "improvement",
    "levenshtein_ratio",
    "load_alias_map",
    "load_test_split",
    "merge",
    "normalize_date",
    "normalize_record",
    "overall_similarity",
    "parse_record",
    "parse_resume",
    "render_resume_text",
    "repair_json",
    "rouge_combined",
    "score_sample",
    "semantic_f1",
    "split",
    "unify_skills",
    "validate",
    "write_reports",
]
