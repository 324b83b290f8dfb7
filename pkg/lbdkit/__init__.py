"""Literature-based discovery toolkit."""

from lbdkit.closed_abc import check_gold_recovery, common_terms
from lbdkit.config import PipelineConfig, validate
from lbdkit.corpus import exclude_shared_records, load_dataset, load_gold, load_psv
from lbdkit.crossbee import ensemble_rank, evaluate_heuristics
from lbdkit.evalkit import RankedList, auc, rank_aggregate, roc_curve
from lbdkit.textprep import PreprocessConfig, build_vocabulary
from lbdkit.vectorspace import aggregate_by_domain, bow, tfidf

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "PreprocessConfig",
    "RankedList",
    "aggregate_by_domain",
    "auc",
    "bow",
    "build_vocabulary",
    "check_gold_recovery",
    "common_terms",
    "ensemble_rank",
    "evaluate_heuristics",
    "exclude_shared_records",
    "load_dataset",
    "load_gold",
    "load_psv",
    "rank_aggregate",
    "roc_curve",
    "tfidf",
    "validate",
]
