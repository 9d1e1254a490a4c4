"""Planning and simulation of multi-round pooled testing with imperfect assays."""

from .exceptions import (
    BatchingNotBeneficial,
    InvertibilityError,
    NoFiniteOptimum,
    SimulationError,
    StrategyError,
)
from .metrics import (
    UNDEFINED,
    ConfusionMatrix,
    ppv_npv,
    single_batch_ppv_npv,
    single_batch_sensitivity,
    single_batch_specificity,
    summarize,
)
from .optimize import ObjectiveSpec, OptimalBatch, expected_tests, optimal_batch_size
from .plan import (
    Plan,
    TerminalMode,
    analytic_procedure_accuracy,
    build_plan,
    case_false_negative_rates,
    expected_test_counts,
    format_plan,
    sequential_model,
)
from .prob import (
    NO_ERROR,
    ErrorModel,
    RoundState,
    invert_batch_negative_rate,
    p_batch_negative,
    subpop_after_negative,
    subpop_after_positive,
)

__version__ = "0.1.0"

__all__ = [
    "ObjectiveSpec",
    "OptimalBatch",
    "expected_tests",
    "optimal_batch_size",
    "BatchingNotBeneficial",
    "InvertibilityError",
    "NoFiniteOptimum",
    "SimulationError",
    "StrategyError",
    "UNDEFINED",
    "ConfusionMatrix",
    "ppv_npv",
    "single_batch_ppv_npv",
    "single_batch_sensitivity",
    "single_batch_specificity",
    "summarize",
    "Plan",
    "TerminalMode",
    "analytic_procedure_accuracy",
    "build_plan",
    "case_false_negative_rates",
    "expected_test_counts",
    "format_plan",
    "sequential_model",
    "NO_ERROR",
    "ErrorModel",
    "RoundState",
    "invert_batch_negative_rate",
    "p_batch_negative",
    "subpop_after_negative",
    "subpop_after_positive",
]
