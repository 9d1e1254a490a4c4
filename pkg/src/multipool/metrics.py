"""Diagnostic accuracy of single-step batch testing and Bayes predictive values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .prob import NO_ERROR, ErrorModel

__all__ = [
    "UNDEFINED",
    "Undefined",
    "Measure",
    "ConfusionMatrix",
    "AccuracySummary",
    "single_batch_sensitivity",
    "single_batch_false_positive_terms",
    "single_batch_specificity",
    "ppv_npv",
    "single_batch_ppv_npv",
    "summarize",
    "is_defined",
]


class Undefined:
    """Marker for a ratio whose denominator is zero. Serialises as ``NA``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NA"

    __str__ = __repr__

    def __bool__(self):
        return False

    def __reduce__(self):
        return (Undefined, ())


UNDEFINED = Undefined()
Measure = Union[float, Undefined]


def is_defined(value) -> bool:
    return value is not UNDEFINED


def _ratio(num: float, den: float) -> Measure:
    return num / den if den > 0 else UNDEFINED


@dataclass(frozen=True)
class ConfusionMatrix:
    true_positive: float = 0.0
    false_positive: float = 0.0
    true_negative: float = 0.0
    false_negative: float = 0.0

    def __post_init__(self):
        for name in ("true_positive", "false_positive", "true_negative", "false_negative"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> float:
        return self.true_positive + self.false_positive + self.true_negative + self.false_negative

    @classmethod
    def from_labels(cls, infected, flagged) -> "ConfusionMatrix":
        """Build counts from two boolean arrays (truth, test conclusion)."""
        infected = np.asarray(infected, dtype=bool)
        flagged = np.asarray(flagged, dtype=bool)
        tp = int(np.count_nonzero(infected & flagged))
        fn = int(np.count_nonzero(infected)) - tp
        fp = int(np.count_nonzero(flagged)) - tp
        tn = infected.size - tp - fn - fp
        return cls(tp, fp, tn, fn)


@dataclass(frozen=True)
class AccuracySummary:
    accuracy: Measure
    sensitivity: Measure
    specificity: Measure
    ppv: Measure
    npv: Measure

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "ppv": self.ppv,
            "npv": self.npv,
        }


def summarize(cm: ConfusionMatrix) -> AccuracySummary:
    tp, fp, tn, fn = cm.true_positive, cm.false_positive, cm.true_negative, cm.false_negative
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")
    return AccuracySummary(
        accuracy=_ratio(tp + tn, cm.total),
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        ppv=_ratio(tp, tp + fp),
        npv=_ratio(tn, tn + fn),
    )


def single_batch_sensitivity(err: ErrorModel = NO_ERROR) -> float:
    # an infected person is missed by the pool (beta) or by the retest (beta)
    return 1.0 - err.beta * (2.0 - err.beta)


def single_batch_false_positive_terms(n: int, p: float, err: ErrorModel = NO_ERROR):
    """Joint probabilities that an uninfected member ends up flagged.

    Returns ``(clean_batch, infected_batch)``: the contribution from batches
    with no infected member, ``alpha^2 (1-p)^n``, and from batches holding at
    least one, ``alpha (1-beta) [1 - (1-p)^n - p]``.
    """
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    a, b = err.alpha, err.beta
    qn = (1.0 - p) ** n
    return a * a * qn, a * (1.0 - b) * (1.0 - qn - p)


def single_batch_specificity(n: int, p: float, err: ErrorModel = NO_ERROR) -> float:
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    a, b = err.alpha, err.beta
    return (1.0 - a + a * b) + a * err.contrast * (1.0 - p) ** (n - 1)


def ppv_npv(p: float, sensitivity: float, specificity: float):
    """Positive and negative predictive values by Bayes' rule.

    Either value is ``UNDEFINED`` when its denominator vanishes.
    """
    se, sp = sensitivity, specificity
    ppv = _ratio(se * p, se * p + (1.0 - sp) * (1.0 - p))
    npv = _ratio(sp * (1.0 - p), sp * (1.0 - p) + (1.0 - se) * p)
    return ppv, npv


def single_batch_ppv_npv(n: int, p: float, err: ErrorModel = NO_ERROR):
    return ppv_npv(p, single_batch_sensitivity(err), single_batch_specificity(n, p, err))
