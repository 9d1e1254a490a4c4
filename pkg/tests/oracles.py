"""Brute-force oracles shared by the unit and acceptance suites."""

import math

from multipool.optimize import N_MAX, expected_tests


def first_basin_scan(spec):
    """Brute-force argmin of T over 2..ceil(-2/ln q), smaller n on ties.

    Past ``-2/ln q`` the stationarity function is decreasing, so any later
    dip in T comes from the 1-beta floor at huge n rather than from a
    second interior optimum.
    """
    hi = min(N_MAX, math.ceil(-2.0 / math.log1p(-spec.p)))
    return min(range(2, max(hi, 2) + 1), key=lambda n: (expected_tests(n, spec), n))


def full_scan(spec, hi=N_MAX):
    return min(range(2, hi + 1), key=lambda n: (expected_tests(n, spec), n))
