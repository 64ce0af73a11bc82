"""Ordinal Shapley values: exact solvers, sampling estimators, error bounds
and a data-valuation benchmark for utilities that depend on coalition order."""

from .bounds import (
    CmcBoundInput,
    TmcBoundInput,
    bennett_h,
    cmc_bound,
    positional_range,
    tmc_bound,
    truncation_bias,
    vector_bound,
)
from .core import (
    CachedUtility,
    FunctionUtility,
    OracleError,
    SumUtility,
    UtilityOracle,
    ValueVector,
    apply_transposition,
    canonical_sequence,
    insert_at,
)
from .estimators import EstimatorConfig, cmc_estimate, ctmc_estimate, tmc_estimate
from .exact import (
    ExactSizeError,
    Partition,
    classic_shapley,
    ordinal_shapley,
    partial_ordinal_shapley,
    partial_ordinal_shapley_subset_form,
    special_case_across_union,
    special_case_within_union,
)
from .synthetic import TableUtility

__version__ = "0.1.0"

__all__ = [
    "CachedUtility", "CmcBoundInput", "EstimatorConfig", "ExactSizeError", "FunctionUtility",
    "OracleError", "Partition", "SumUtility", "TableUtility", "TmcBoundInput", "UtilityOracle", "ValueVector",
    "apply_transposition", "bennett_h", "canonical_sequence", "classic_shapley", "cmc_bound",
    "cmc_estimate", "ctmc_estimate", "insert_at", "ordinal_shapley", "partial_ordinal_shapley",
    "partial_ordinal_shapley_subset_form", "positional_range", "special_case_across_union",
    "special_case_within_union", "tmc_bound", "tmc_estimate", "truncation_bias", "vector_bound",
]
