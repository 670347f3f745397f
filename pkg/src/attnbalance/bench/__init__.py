"""Benchmark kit: dataset builders, answer parsing, metrics, and analysis sweeps."""

from .annotations import (
    AnnotationRecord,
    SimilarityMatrix,
    load_annotations_jsonl,
    load_similarity_csv,
    view_groups_from_annotations,
    write_annotations_jsonl,
    write_similarity_csv,
)
from .builders import build_count_set, build_existence_set, build_identity_set
from .correlation import CorrelationResult, correlation_analysis
from .instances import (
    NO,
    TASK_COUNT,
    TASK_EXISTENCE,
    TASK_IDENTITY,
    YES,
    QAInstance,
    label_count,
    label_existence,
    read_dataset,
    rederive_gold,
    write_dataset,
)
from .metrics import (
    UNPARSEABLE,
    EvalReport,
    PredictionRecord,
    compute_metrics,
    macro_average,
    parse_answer,
    read_predictions,
    write_predictions,
)
from .sweeps import sweep_image_count, sweep_negative_position, sweep_negative_ratio

__all__ = [
    "AnnotationRecord",
    "CorrelationResult",
    "EvalReport",
    "NO",
    "PredictionRecord",
    "QAInstance",
    "SimilarityMatrix",
    "TASK_COUNT",
    "TASK_EXISTENCE",
    "TASK_IDENTITY",
    "UNPARSEABLE",
    "YES",
    "build_count_set",
    "build_existence_set",
    "build_identity_set",
    "compute_metrics",
    "correlation_analysis",
    "label_count",
    "label_existence",
    "load_annotations_jsonl",
    "load_similarity_csv",
    "macro_average",
    "parse_answer",
    "read_dataset",
    "read_predictions",
    "rederive_gold",
    "sweep_image_count",
    "sweep_negative_position",
    "sweep_negative_ratio",
    "view_groups_from_annotations",
    "write_annotations_jsonl",
    "write_dataset",
    "write_predictions",
    "write_similarity_csv",
]
