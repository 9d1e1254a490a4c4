"""Optimal batch size for one round of pooled testing.

The expected number of tests for ``N`` people pooled in batches of ``n``,
with every member of a positive batch retested individually, is

    T(n) = N [1/n + 1 - beta - (1 - alpha - beta) q^n].

Setting ``T'(x) = 0`` gives ``x q^(x/2) = [-(1-alpha-beta) ln q]^(-1/2)``.
Its smaller root is the real-valued minimiser; the integer optimum is the
better of its floor and ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .exceptions import BatchingNotBeneficial, NoFiniteOptimum
from .prob import NO_ERROR, ErrorModel, q_pow

__all__ = [
    "ObjectiveSpec",
    "OptimalBatch",
    "expected_tests",
    "stationarity_residual",
    "secant",
    "optimal_batch_size",
    "N_MAX",
]

N_MAX = 1000
SECANT_TOL = 1e-8
SECANT_MAXITER = 200


@dataclass(frozen=True)
class ObjectiveSpec:
    p: float
    err: ErrorModel = field(default=NO_ERROR)
    N: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p!r} outside [0, 1]")
        if self.N <= 0:
            raise ValueError(f"N={self.N!r} must be positive")

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class OptimalBatch:
    n_star: int
    x_real: float
    expected_tests_per_person: float


def expected_tests(n: int, spec: ObjectiveSpec) -> float:
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    err = spec.err
    return spec.N * (1.0 / n + 1.0 - err.beta - err.contrast * q_pow(spec.q, n))


def _log_q(spec: ObjectiveSpec) -> float:
    if spec.p <= 0.0:
        raise NoFiniteOptimum("no finite optimum when q = 1")
    if spec.p >= 1.0:
        raise NoFiniteOptimum("no finite optimum when q = 0")
    return math.log1p(-spec.p)


def stationarity_residual(x: float, spec: ObjectiveSpec) -> float:
    """Log form of ``x q^(x/2) sqrt(-(1-a-b) ln q) - 1``.

    Returns ``ln x + (x/2) ln q + (1/2) ln(-(1-a-b) ln q)``, which has the
    same roots and sign as the first-order condition and is concave in
    ``x``, peaking at ``x = -2 / ln q``.
    """
    if x <= 0:
        raise ValueError(f"x={x!r} must be positive")
    log_q = _log_q(spec)
    return math.log(x) + 0.5 * x * log_q + 0.5 * math.log(-spec.err.contrast * log_q)


def secant(f, x0, x1, tol=SECANT_TOL, maxiter=SECANT_MAXITER):
    """Secant iteration; returns ``(root, converged)``."""
    f0, f1 = f(x0), f(x1)
    for _ in range(maxiter):
        if f1 == f0:
            return x1, abs(f1) < tol
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if abs(x2 - x1) < tol:
            return x2, True
        x0, f0 = x1, f1
        x1 = x2
        try:
            f1 = f(x1)
        except ValueError:
            return x1, False
    return x1, False


def _scan(spec: ObjectiveSpec, lo: int, hi: int) -> int:
    best_n, best_t = lo, expected_tests(lo, spec)
    for n in range(lo + 1, hi + 1):
        t = expected_tests(n, spec)
        if t < best_t:
            best_n, best_t = n, t
    return best_n


def optimal_batch_size(spec: ObjectiveSpec, n_max: int = N_MAX) -> OptimalBatch:
    """Integer batch size minimising expected tests per person.

    Raises ``BatchingNotBeneficial`` when the best size is 1 or pooling is no
    cheaper than individual testing, and ``NoFiniteOptimum`` for ``p`` in
    {0, 1}.
    """
    log_q = _log_q(spec)
    x_peak = -2.0 / log_q
    f = lambda x: stationarity_residual(x, spec)  # noqa: E731
    if f(x_peak) <= 0.0:
        # T is decreasing everywhere: pooling only "wins" by missing cases
        raise BatchingNotBeneficial(
            f"no interior minimum at p={spec.p}", best_n=1
        )

    x1 = min(max(2.0 / math.sqrt(spec.p), 2.0), float(n_max), x_peak)
    x0 = min(2.0, 0.5 * x1)
    x_real, ok = secant(f, x0, x1)
    if not ok or not (0.0 < x_real <= x_peak):
        # fall back to the integer scan over the first basin
        hi = min(n_max, int(math.ceil(x_peak)))
        n = _scan(spec, 1, max(hi, 1))
        x_real = float(n)
        lo_n, hi_n = n, n
    else:
        lo_n = max(1, int(math.floor(x_real)))
        hi_n = max(1, int(math.ceil(x_real)))
    lo_n, hi_n = min(lo_n, n_max), min(hi_n, n_max)
    t_lo, t_hi = expected_tests(lo_n, spec), expected_tests(hi_n, spec)
    n_star = lo_n if t_lo <= t_hi else hi_n
    per_person = expected_tests(n_star, spec) / spec.N

    if n_star < 2:
        raise BatchingNotBeneficial(f"optimal batch size is 1 at p={spec.p}", best_n=1)
    if per_person >= 1.0:
        raise BatchingNotBeneficial(
            f"batching costs {per_person:.4f} tests per person at p={spec.p}",
            best_n=n_star,
        )
    return OptimalBatch(n_star=n_star, x_real=x_real, expected_tests_per_person=per_person)
