import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from multipool.exceptions import InvertibilityError
from multipool.prob import (
    NO_ERROR,
    ErrorModel,
    InfectionModel,
    RoundState,
    batch_outcome_probs,
    binom_pmf,
    invert_batch_negative_rate,
    p_batch_negative,
    p_batch_positive,
    subpop_after_negative,
    subpop_after_positive,
)

BASE_ERR = ErrorModel(0.01, 0.15)

probs = st.floats(0.0, 1.0, allow_nan=False)
open_probs = st.floats(1e-6, 1 - 1e-6, allow_nan=False)
sizes = st.integers(1, 500)


@st.composite
def error_models(draw):
    a = draw(st.floats(0.0, 0.4))
    b = draw(st.floats(0.0, 0.4))
    return ErrorModel(a, b)


class TestErrorModel:
    def test_defaults_are_perfect(self):
        assert NO_ERROR.sensitivity == 1.0 and NO_ERROR.specificity == 1.0

    @pytest.mark.parametrize("a,b", [(-0.1, 0.1), (0.1, 1.0), (0.6, 0.5), (0.5, 0.5)])
    def test_rejects_invalid(self, a, b):
        with pytest.raises(ValueError):
            ErrorModel(a, b)

    def test_from_accuracy(self):
        err = ErrorModel.from_accuracy(0.85, 0.99)
        assert err.alpha == pytest.approx(0.01)
        assert err.beta == pytest.approx(0.15)
        assert err.contrast == pytest.approx(0.84)

    def test_infection_model(self):
        assert InfectionModel(0.3).q == pytest.approx(0.7)
        with pytest.raises(ValueError):
            InfectionModel(1.5)


class TestBinomial:
    def test_examples(self):
        assert binom_pmf(2, 0.5, 1) == pytest.approx(0.5)
        assert binom_pmf(12, 0.01, 0) == pytest.approx(0.99**12)
        assert binom_pmf(12, 0.01, 0) == pytest.approx(0.886384, abs=1e-6)
        assert binom_pmf(5, 0.0, 0) == 1.0

    @given(st.integers(1, 60), probs)
    def test_sums_to_one(self, n, p):
        assert sum(binom_pmf(n, p, k) for k in range(n + 1)) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("k", [-1, 6])
    def test_rejects_k(self, k):
        with pytest.raises(ValueError):
            binom_pmf(5, 0.1, k)

    def test_rejects_p(self):
        with pytest.raises(ValueError):
            binom_pmf(5, 1.2, 1)


class TestBatchNegative:
    def test_worked_example(self):
        assert p_batch_negative(12, 0.99, BASE_ERR) == pytest.approx(0.894563, abs=5e-7)

    def test_clean_batch(self):
        assert p_batch_negative(10, 1.0, BASE_ERR) == pytest.approx(0.99)

    def test_against_monte_carlo(self):
        err = ErrorModel(0.03, 0.25)
        rng = np.random.default_rng(11)
        trials = 2_000_000
        any_inf = rng.random((trials, 7)) < 0.03
        any_inf = any_inf.any(axis=1)
        u = rng.random(trials)
        negative = np.where(any_inf, u < err.beta, u >= err.alpha)
        expected = 0.72 * 0.97**7 + 0.25
        se = math.sqrt(expected * (1 - expected) / trials)
        assert abs(negative.mean() - expected) < 4 * se
        assert p_batch_negative(7, 0.97, err) == pytest.approx(expected, rel=1e-12)

    @given(sizes, probs, error_models())
    def test_complementary(self, n, q, err):
        probs_ = batch_outcome_probs(n, q, err)
        assert probs_.p_batch_negative + probs_.p_batch_positive == pytest.approx(1.0, abs=1e-12)
        assert p_batch_positive(n, q, err) == probs_.p_batch_positive

    @given(sizes, probs)
    def test_no_error_reduces_to_power(self, n, q):
        assert p_batch_negative(n, q) == pytest.approx(q**n, rel=1e-12, abs=1e-300)

    def test_rejects_bad_size(self):
        with pytest.raises(ValueError):
            p_batch_negative(0, 0.9)


class TestInversion:
    def test_worked_example(self):
        A = p_batch_negative(12, 0.99, BASE_ERR)
        assert invert_batch_negative_rate(A, 12, BASE_ERR) == pytest.approx(0.99, abs=1e-12)
        assert invert_batch_negative_rate(0.894563, 12, BASE_ERR) == pytest.approx(0.99, abs=1e-6)

    def test_upper_end_maps_to_one(self):
        assert invert_batch_negative_rate(1 - BASE_ERR.alpha, 1, BASE_ERR) == 1.0

    def test_round_trip_example(self):
        err = ErrorModel(0.03, 0.1)
        q = invert_batch_negative_rate(0.6, 20, err)
        assert p_batch_negative(20, q, err) == pytest.approx(0.6, abs=1e-12)

    @pytest.mark.parametrize("A", [0.15, 0.1, 0.995, 1.0])
    def test_outside_range(self, A):
        with pytest.raises(InvertibilityError, match="invertible range"):
            invert_batch_negative_rate(A, 10, BASE_ERR)

    @given(sizes, st.floats(0.0, 1.0), error_models())
    def test_round_trip(self, n, q, err):
        A = p_batch_negative(n, q, err)
        assume(err.beta < A <= 1 - err.alpha)
        q_back = invert_batch_negative_rate(A, n, err)
        assert p_batch_negative(n, q_back, err) == pytest.approx(A, abs=1e-10)


def _state(p, N, n):
    return RoundState(p=p, N=N, n=n)


class TestBranches:
    def test_negative_worked_example(self):
        s = subpop_after_negative(_state(0.01, 100_000, 12), BASE_ERR)
        assert s.N == pytest.approx(89_456, abs=1)
        assert s.r == pytest.approx(0.019, abs=0.001)
        assert s.p == pytest.approx(0.00167, abs=2e-5)

    def test_negative_low_rate(self):
        s = subpop_after_negative(_state(0.001, 100_000, 35), BASE_ERR)
        assert s.N == pytest.approx(96_109, abs=1)
        assert s.p == pytest.approx(2e-4, rel=0.25)

    def test_positive_examples(self):
        s = subpop_after_positive(_state(0.01, 100_000, 12), BASE_ERR)
        assert s.N == pytest.approx(10_544, abs=1)
        assert s.p == pytest.approx(0.08, abs=0.005)
        s = subpop_after_positive(_state(0.001, 100_000, 35), BASE_ERR)
        assert s.N == pytest.approx(3_891, abs=1)
        assert s.p == pytest.approx(0.022, abs=0.0005)

    def test_zero_rate_is_continuous(self):
        neg = subpop_after_negative(_state(0.0, 1000, 10), BASE_ERR)
        pos = subpop_after_positive(_state(0.0, 1000, 10), BASE_ERR)
        assert (neg.p, neg.r) == (0.0, 0.0)
        assert neg.N == pytest.approx(990)
        assert pos.p == 0.0 and pos.N == pytest.approx(10)
        # the limit from above agrees
        tiny = subpop_after_negative(_state(1e-12, 1000, 10), BASE_ERR)
        assert tiny.p < 1e-12 and tiny.r < 1e-10

    def test_needs_batch_size(self):
        with pytest.raises(ValueError):
            subpop_after_negative(RoundState(p=0.1, N=10), BASE_ERR)

    @given(open_probs, st.floats(1.0, 1e7), sizes, error_models())
    def test_conservation(self, p, N, n, err):
        prev = _state(p, N, n)
        neg, pos = subpop_after_negative(prev, err), subpop_after_positive(prev, err)
        assert neg.N + pos.N == pytest.approx(N, abs=1e-9 * N)
        assert neg.N * neg.p + pos.N * pos.p == pytest.approx(N * p, abs=1e-9 * N)

    @given(open_probs, sizes, error_models())
    def test_monotone(self, p, n, err):
        prev = _state(p, 1000.0, n)
        neg, pos = subpop_after_negative(prev, err), subpop_after_positive(prev, err)
        assume(neg.N > 0 and pos.N > 0)
        assert neg.p <= p <= pos.p
