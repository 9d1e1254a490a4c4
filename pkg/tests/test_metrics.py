import inspect

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multipool.metrics import (
    UNDEFINED,
    ConfusionMatrix,
    is_defined,
    ppv_npv,
    single_batch_false_positive_terms,
    single_batch_ppv_npv,
    single_batch_sensitivity,
    single_batch_specificity,
    summarize,
)
from multipool.optimize import ObjectiveSpec, optimal_batch_size
from multipool.prob import ErrorModel
from reference_tables import (
    PREDICTIVE_GRID,
    PREDICTIVE_SENSITIVITIES,
    PREDICTIVE_SPECIFICITY,
    PREDICTIVE_TYPOS,
    SPEC_RATES,
    SPECIFICITY_GRID,
)

BASE_ERR = ErrorModel(0.01, 0.15)


def flagged_probability_uninfected(n, p, err):
    """Joint probability oracle by enumerating the other n-1 members.

    An uninfected member is flagged when the pool reads positive and then
    the individual retest reads positive.
    """
    a, b = err.alpha, err.beta
    clean = (1 - p) ** (n - 1)
    pool_pos = clean * a + (1 - clean) * (1 - b)
    return pool_pos * a


class TestSensitivity:
    @pytest.mark.parametrize("beta,expected", [(0.15, 0.7225), (0.1, 0.81), (0.2, 0.64),
                                               (0.25, 0.5625), (0.0, 1.0)])
    def test_values(self, beta, expected):
        assert single_batch_sensitivity(ErrorModel(0.01, beta)) == pytest.approx(expected)

    def test_takes_no_size_or_rate(self):
        assert list(inspect.signature(single_batch_sensitivity).parameters) == ["err"]


class TestSpecificity:
    def test_examples(self):
        assert single_batch_specificity(10, 0.01, BASE_ERR) == pytest.approx(0.9992, abs=5e-5)
        assert single_batch_specificity(35, 0.001, BASE_ERR) == pytest.approx(0.9996, abs=5e-5)

    @given(st.integers(1, 200), st.floats(0, 1), st.floats(0, 0.5))
    def test_perfect_specificity_without_false_positives(self, n, p, b):
        assert single_batch_specificity(n, p, ErrorModel(0.0, b)) == pytest.approx(1.0)

    @given(st.integers(1, 200), st.floats(0, 0.99), st.floats(0, 0.3), st.floats(0, 0.3))
    def test_consistent_with_joint_terms(self, n, p, a, b):
        err = ErrorModel(a, b)
        clean, infected = single_batch_false_positive_terms(n, p, err)
        via_terms = 1 - (clean + infected) / (1 - p)
        assert single_batch_specificity(n, p, err) == pytest.approx(via_terms, abs=1e-12)

    @given(st.integers(1, 200), st.floats(0, 0.99), st.floats(0, 0.3), st.floats(0, 0.3))
    def test_matches_enumeration(self, n, p, a, b):
        err = ErrorModel(a, b)
        fp = flagged_probability_uninfected(n, p, err)
        assert single_batch_specificity(n, p, err) == pytest.approx(1 - fp, abs=1e-12)

    def test_single_member_pool(self):
        # a one-person pool is just two tests in a row
        err = ErrorModel(0.03, 0.2)
        assert single_batch_specificity(1, 0.05, err) == pytest.approx(1 - 0.03**2)

    def test_fixed_size_reference_grid(self):
        # every printed fixed-size entry to half a unit in the fourth decimal,
        # except one that sits on a rounding boundary
        boundary = {(0.03, 0.1, 0.05)}
        for (a, b), (fixed, _, _) in SPECIFICITY_GRID.items():
            for p, ref in zip(SPEC_RATES, fixed):
                got = single_batch_specificity(10, p, ErrorModel(a, b))
                tol = 1e-4 if (a, b, p) in boundary else 5e-5
                assert got == pytest.approx(ref, abs=tol), (a, b, p)

    def test_boundary_entry(self):
        got = single_batch_specificity(10, 0.05, ErrorModel(0.03, 0.1))
        assert round(got, 4) == 0.9894
        assert got == pytest.approx(0.98945, abs=1e-6)

    def test_optimal_size_reference_grid(self):
        for (a, b), (_, sizes, spec) in SPECIFICITY_GRID.items():
            err = ErrorModel(a, b)
            for p, n_ref, ref in zip(SPEC_RATES, sizes, spec):
                n = optimal_batch_size(ObjectiveSpec(p, err)).n_star
                assert n == n_ref, (a, b, p)
                assert single_batch_specificity(n, p, err) == pytest.approx(ref, abs=5e-5)

    def test_rejects_size(self):
        with pytest.raises(ValueError):
            single_batch_specificity(0, 0.1, BASE_ERR)


class TestPredictiveValues:
    def test_examples(self):
        ppv, npv = ppv_npv(0.01, 0.85, 0.99)
        assert (round(ppv, 4), round(npv, 4)) == (0.4620, 0.9985)
        ppv, npv = ppv_npv(0.2, 0.85, 0.99)
        assert (round(ppv, 4), round(npv, 4)) == (0.9551, 0.9635)

    def test_low_rate(self):
        ppv, npv = ppv_npv(0.001, 0.85, 0.99)
        assert round(npv, 4) == 0.9998
        # 85e-5 true positives against 999e-5 false ones
        assert ppv == pytest.approx(0.00085 / (0.00085 + 0.00999))
        assert round(ppv, 4) == 0.0784

    def test_reference_grid(self):
        checked = 0
        for p, (ppv_row, npv_row) in PREDICTIVE_GRID.items():
            for se, ref_ppv, ref_npv in zip(PREDICTIVE_SENSITIVITIES, ppv_row, npv_row):
                ppv, npv = ppv_npv(p, se, PREDICTIVE_SPECIFICITY)
                if (p, "npv", se) not in PREDICTIVE_TYPOS:
                    assert npv == pytest.approx(ref_npv, abs=1e-4), (p, se)
                    checked += 1
                if (p, "ppv", se) in PREDICTIVE_TYPOS:
                    continue
                if p == 0.001:
                    # this row is printed a factor of ten low throughout
                    assert ppv / 10 == pytest.approx(ref_ppv, abs=1e-4), se
                else:
                    assert ppv == pytest.approx(ref_ppv, abs=1e-4), (p, se)
                checked += 1
        assert checked == 2 * 9 * len(PREDICTIVE_GRID) - 2

    def test_typo_cells_are_far_off(self):
        assert abs(ppv_npv(0.01, 0.81, 0.99)[0] - 0.5500) > 0.09
        assert abs(ppv_npv(0.15, 0.79, 0.99)[1] - 0.0639) > 0.8

    def test_undefined(self):
        ppv, npv = ppv_npv(0.0, 0.9, 1.0)
        assert ppv is UNDEFINED and npv == 1.0
        ppv, npv = ppv_npv(1.0, 1.0, 0.9)
        assert npv is UNDEFINED

    def test_single_batch_values(self):
        ppv, npv = single_batch_ppv_npv(10, 0.001, BASE_ERR)
        assert ppv == pytest.approx(0.8049, abs=5e-4)
        assert npv == pytest.approx(0.9997, abs=5e-5)
        ppv, npv = single_batch_ppv_npv(10, 0.01, BASE_ERR)
        assert ppv == pytest.approx(0.8983, abs=5e-5)
        assert npv == pytest.approx(0.9972, abs=5e-5)

    @given(st.integers(1, 100), st.floats(1e-4, 0.5), st.floats(0, 0.4))
    def test_no_false_positive_pool(self, n, p, b):
        assert single_batch_ppv_npv(n, p, ErrorModel(0.0, b))[0] == pytest.approx(1.0)


class TestSummary:
    def test_direct_ratios(self):
        s = summarize(ConfusionMatrix(true_positive=85, false_positive=10, true_negative=990,
                                      false_negative=15))
        assert s.sensitivity == pytest.approx(0.85)
        assert s.specificity == pytest.approx(0.99)
        assert s.accuracy == pytest.approx(1075 / 1100)

    def test_empty_margin(self):
        s = summarize(ConfusionMatrix(true_negative=10, false_negative=1))
        assert s.ppv is UNDEFINED and not is_defined(s.ppv)
        assert s.sensitivity == 0.0
        assert repr(UNDEFINED) == "NA" and not UNDEFINED

    def test_rejects_empty_and_negative(self):
        with pytest.raises(ValueError):
            summarize(ConfusionMatrix())
        with pytest.raises(ValueError):
            ConfusionMatrix(true_positive=-1)

    def test_matches_bayes_on_probabilities(self):
        p, se, sp = 0.03, 0.8, 0.97
        cm = ConfusionMatrix(se * p, (1 - sp) * (1 - p), sp * (1 - p), (1 - se) * p)
        s = summarize(cm)
        ppv, npv = ppv_npv(p, se, sp)
        assert s.ppv == pytest.approx(ppv) and s.npv == pytest.approx(npv)

    def test_from_labels_monte_carlo(self):
        rng = np.random.default_rng(5)
        n = 1_000_000
        infected = rng.random(n) < 0.01
        u = rng.random(n)
        flagged = np.where(infected, u < 0.85, u < 0.01)
        s = summarize(ConfusionMatrix.from_labels(infected, flagged))
        n_inf = infected.sum()
        assert abs(s.sensitivity - 0.85) < 4 * np.sqrt(0.85 * 0.15 / n_inf)
        assert abs(s.specificity - 0.99) < 4 * np.sqrt(0.99 * 0.01 / (n - n_inf))

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=50))
    def test_from_labels_counts(self, pairs):
        inf = np.array([a for a, _ in pairs])
        flg = np.array([b for _, b in pairs])
        cm = ConfusionMatrix.from_labels(inf, flg)
        assert cm.total == len(pairs)
        assert cm.true_positive == sum(a and b for a, b in pairs)
        assert cm.false_positive == sum((not a) and b for a, b in pairs)
