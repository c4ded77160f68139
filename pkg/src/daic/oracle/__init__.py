from .domain import DomainInvariant, check_domain
from .forest import FailureForest
from .pseudo import (
    FAMILIES,
    MODES,
    Outcome,
    PseudoOracle,
    Verdict,
    Verdicts,
    extract_data_rules,
    judge,
    judge_batch,
    predicted_accuracy,
    train_failure_forest,
)
from .rules import DataRule, DataRuleMiner, GainRatioTree, binarize, filter_rules

__all__ = [
    "DataRule",
    "DataRuleMiner",
    "DomainInvariant",
    "FAMILIES",
    "FailureForest",
    "GainRatioTree",
    "MODES",
    "Outcome",
    "PseudoOracle",
    "Verdict",
    "Verdicts",
    "binarize",
    "check_domain",
    "extract_data_rules",
    "filter_rules",
    "judge",
    "judge_batch",
    "predicted_accuracy",
    "train_failure_forest",
]
