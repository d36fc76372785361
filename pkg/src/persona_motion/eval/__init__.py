"""Evaluation metrics and protocols."""

from .metrics import FeatureStats, diversity, fid, r_precision, r_precision_curve
from .pra import PRAClassifier, PRATrainConfig, evaluation_crops, pra_score, train_pra
from .protocol import (
    CSV_COLUMNS,
    METRIC_COLUMNS,
    EvalProtocol,
    Generation,
    config_hash,
    format_rows,
    generate,
    reference_stats,
    run_protocol,
    score,
)

__all__ = [
    "CSV_COLUMNS", "METRIC_COLUMNS", "EvalProtocol", "FeatureStats", "Generation", "PRAClassifier",
    "PRATrainConfig", "config_hash", "diversity", "evaluation_crops", "fid", "format_rows", "generate",
    "pra_score", "r_precision", "r_precision_curve", "reference_stats", "run_protocol", "score", "train_pra",
]
