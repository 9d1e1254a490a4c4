"""Closed-form batch outcome probabilities under a binomial infection model.

Every person is infected independently with probability ``p`` and a single
assay misreads an uninfected sample with probability ``alpha`` (false
positive) and an infected sample with probability ``beta`` (false negative).
A pooled sample behaves like one assay: it reads positive with probability
``1 - beta`` when it holds at least one infected sample and ``alpha``
otherwise.  Error rates do not depend on the pool size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .exceptions import InvertibilityError

__all__ = [
    "ErrorModel",
    "NO_ERROR",
    "InfectionModel",
    "BatchOutcomeProbs",
    "RoundState",
    "binom_pmf",
    "q_pow",
    "p_batch_negative",
    "p_batch_positive",
    "batch_outcome_probs",
    "invert_batch_negative_rate",
    "subpop_after_negative",
    "subpop_after_positive",
]


def _check_probability(name, value, *, upper_open=False):
    if not (0.0 <= value <= 1.0) or (upper_open and value >= 1.0):
        bound = ")" if upper_open else "]"
        raise ValueError(f"{name}={value!r} outside [0, 1{bound}")


@dataclass(frozen=True)
class ErrorModel:
    """Per-assay error rates: ``alpha`` false positive, ``beta`` false negative."""

    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        _check_probability("alpha", self.alpha, upper_open=True)
        _check_probability("beta", self.beta, upper_open=True)
        if self.alpha + self.beta >= 1.0:
            raise ValueError("alpha + beta must be < 1")

    @property
    def sensitivity(self) -> float:
        return 1.0 - self.beta

    @property
    def specificity(self) -> float:
        return 1.0 - self.alpha

    @property
    def contrast(self) -> float:
        """``1 - alpha - beta``, the weight on ``q**n`` in the batch-negative rate."""
        return 1.0 - self.alpha - self.beta

    @classmethod
    def from_accuracy(cls, sensitivity: float, specificity: float) -> "ErrorModel":
        return cls(alpha=1.0 - specificity, beta=1.0 - sensitivity)


NO_ERROR = ErrorModel()


@dataclass(frozen=True)
class InfectionModel:
    p: float

    def __post_init__(self):
        _check_probability("p", self.p)

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class BatchOutcomeProbs:
    p_batch_negative: float
    p_batch_positive: float


@dataclass(frozen=True)
class RoundState:
    """A subpopulation entering a round.

    ``N`` is kept real-valued; rounding happens only when batches are counted.
    ``n`` is the batch size chosen for the round (``None`` until chosen) and
    ``r`` the probability that a batch from the parent round that landed in
    this branch held at least one infected sample.
    """

    p: float
    N: float
    n: Optional[int] = None
    r: Optional[float] = None

    def with_batch_size(self, n: int) -> "RoundState":
        return RoundState(p=self.p, N=self.N, n=n, r=self.r)


def binom_pmf(n: int, p: float, k: int) -> float:
    """Probability of exactly ``k`` infected in a batch of ``n``."""
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    _check_probability("p", p)
    # 0**0 == 1 covers the p in {0, 1} corners
    return math.comb(n, k) * p**k * (1.0 - p) ** (n - k)


def q_pow(q: float, n: float) -> float:
    """``q**n`` evaluated as ``exp(n log q)``; exact at ``q`` in {0, 1}."""
    if q == 1.0:
        return 1.0
    if q == 0.0:
        return 0.0
    return math.exp(n * math.log(q))


def p_batch_negative(n: int, q: float, err: ErrorModel = NO_ERROR) -> float:
    """Probability a batch of ``n`` reads negative: ``(1-a-b) q^n + b``."""
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    _check_probability("q", q)
    return err.contrast * q_pow(q, n) + err.beta


def p_batch_positive(n: int, q: float, err: ErrorModel = NO_ERROR) -> float:
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    _check_probability("q", q)
    return (1.0 - err.beta) - err.contrast * q_pow(q, n)


def batch_outcome_probs(n: int, q: float, err: ErrorModel = NO_ERROR) -> BatchOutcomeProbs:
    return BatchOutcomeProbs(p_batch_negative(n, q, err), p_batch_positive(n, q, err))


def invert_batch_negative_rate(A: float, n: int, err: ErrorModel = NO_ERROR) -> float:
    """Recover ``q`` from an observed batch-negative fraction ``A``.

    Valid for ``beta < A <= 1 - alpha``; ``A = 1 - alpha`` maps to ``q = 1``.
    """
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    hi = 1.0 - err.alpha
    if not (err.beta < A <= hi):
        raise InvertibilityError(
            f"rate outside invertible range: A={A!r} not in ({err.beta}, {hi}]"
        )
    ratio = (A - err.beta) / err.contrast
    return min(1.0, ratio ** (1.0 / n))


def _split(prev: RoundState, err: ErrorModel):
    if prev.n is None or prev.n < 1:
        raise ValueError("previous round needs a batch size n >= 1")
    _check_probability("p", prev.p)
    if prev.N < 0:
        raise ValueError(f"N={prev.N} must be non-negative")
    log_q = math.log1p(-prev.p) if prev.p < 1.0 else -math.inf
    qn = math.exp(prev.n * log_q)
    # 1 - q^n without cancellation for small p
    any_inf = -math.expm1(prev.n * log_q) if prev.p < 1.0 else 1.0
    return qn, any_inf


def subpop_after_negative(prev: RoundState, err: ErrorModel = NO_ERROR) -> RoundState:
    """Expected state of the members of negative batches from ``prev``."""
    qn, any_inf = _split(prev, err)
    a, b = err.alpha, err.beta
    N = prev.N * (err.contrast * qn + b)
    if any_inf == 0.0:
        # p = 0: no infected batches, limit of the ratio is 0
        return RoundState(p=0.0, N=N, r=0.0)
    denom = (1.0 - a) * qn + b * any_inf
    if denom == 0.0:
        # p = 1 with beta = 0: nobody lands here
        return RoundState(p=prev.p, N=N, r=1.0)
    r = b * any_inf / denom
    return RoundState(p=prev.p * r / any_inf, N=N, r=r)


def subpop_after_positive(prev: RoundState, err: ErrorModel = NO_ERROR) -> RoundState:
    """Expected state of the members of positive batches from ``prev``."""
    qn, any_inf = _split(prev, err)
    a, b = err.alpha, err.beta
    N = prev.N * ((1.0 - b) - err.contrast * qn)
    if any_inf == 0.0:
        # only false positives enter
        return RoundState(p=0.0, N=N, r=0.0)
    denom = a * qn + (1.0 - b) * any_inf
    r = (1.0 - b) * any_inf / denom
    return RoundState(p=prev.p * r / any_inf, N=N, r=r)
