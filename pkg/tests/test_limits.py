from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from relufim import limits
from relufim.errors import BasisIndexError, DomainError, HypothesisWarning
from relufim.limits import LimitFn, SpecialConstants, beta_fn


def test_beta_values():
    assert beta_fn(1, 1) == pytest.approx(1.0, rel=1e-14)
    assert beta_fn(0.5, 0.5) == pytest.approx(math.pi, rel=1e-14)
    assert beta_fn(5, 0.5) == pytest.approx(0.812698, abs=1e-6)


@pytest.mark.parametrize("a,b", [(0.7, 0.5), (5.0, 0.5), (25.0, 0.5), (3.3, 7.1)])
def test_beta_recurrence(a, b):
    assert beta_fn(a + 1, b) == pytest.approx(beta_fn(a, b) * a / (a + b), rel=1e-12)


@pytest.mark.parametrize("a,b", [(0, 1), (1, -2)])
def test_beta_domain(a, b):
    with pytest.raises(DomainError):
        beta_fn(a, b)


def test_beta_half_decreasing_and_asymptotic():
    vals = [SpecialConstants(d).beta_half for d in range(3, 120)]
    assert all(v > 0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))
    for d in (50, 100, 500):
        c = SpecialConstants(d)
        assert abs(c.beta_half_asymptotic / c.beta_half - 1) < 0.02


def test_F0_values():
    assert limits.limit_F0(np.zeros(10)) == 0.0
    assert limits.limit_F0(np.eye(10)[0]) == pytest.approx(0.40902, abs=1e-5)
    with pytest.warns(HypothesisWarning):
        limits.limit_F0(np.ones(2))


def test_Fl_values():
    e = np.eye(8)
    assert limits.limit_Fl(e[2], 3) == 0.5
    assert limits.limit_Fl(-e[2], 3) == -0.5
    assert limits.limit_Fl(e[1], 3) == 0.0
    with pytest.raises(BasisIndexError):
        limits.limit_Fl(e[0], 9)


def test_Ftilde_properties(rng):
    d = 10
    assert limits.limit_Ftilde(np.ones(d), 4) == pytest.approx(0.0, abs=1e-15)
    for _ in range(20):
        x = rng.standard_normal(d)
        assert abs(sum(limits.limit_Ftilde(x, g) for g in range(1, d + 1))) < 1e-14
    with pytest.raises(DomainError):
        limits.limit_Ftilde(np.zeros(d), 1)
    with pytest.warns(HypothesisWarning):
        limits.limit_Ftilde(np.ones(5), 1)


def test_Ftilde_boundaries_match_exact_cases():
    d = 10
    c = SpecialConstants(d)
    axis = (d - 1) * math.sqrt(d + 2) / (2 * math.pi * (d + 1) * math.sqrt(2)) * c.beta_half
    assert limits.limit_Ftilde(np.eye(d)[0], 1) == pytest.approx(c.c_diag * (1 - 1 / d), rel=1e-14)
    assert limits.limit_Ftilde(np.eye(d)[0], 1) == pytest.approx(axis, rel=1e-14)
    # x_gamma = 0: the general leading term at r = 0 equals the stated exact case
    orth = np.r_[0.0, np.ones(d - 1)] / math.sqrt(d - 1)
    exact = -math.sqrt(d + 2) / (2 * math.pi * (d + 1) * math.sqrt(2)) * c.beta_half
    assert limits.limit_Ftilde(orth, 1) == pytest.approx(exact, rel=1e-14)
    assert exact == pytest.approx(-axis / (d - 1), rel=1e-14)


def test_Fdiag_identity(rng):
    d = 10
    for _ in range(20):
        x = rng.standard_normal(d)
        for g in (1, 4, 9):
            expected = limits.limit_Ftilde(x, g) - limits.limit_Ftilde(x, d) / (math.sqrt(d) + 1)
            assert limits.limit_Fdiag(x, g) == pytest.approx(expected, rel=1e-12, abs=1e-15)
    with pytest.raises(BasisIndexError):
        limits.limit_Fdiag(x, d)


def test_Fdiag_zero_set_and_axis():
    d, g = 10, 2
    rest = np.ones(d)
    rest[[g - 1, d - 1]] = 0
    rest /= np.linalg.norm(rest)

    def along(r):
        x = math.sqrt(1 - 2 * r) * rest
        x[g - 1] = x[d - 1] = math.sqrt(r)
        return limits.limit_Fdiag(x, g)

    root = brentq(along, 1e-6, 0.49, xtol=1e-15)
    assert root == pytest.approx(1 / d, rel=1e-10)
    c = SpecialConstants(d)
    expected = c.c_diag * (-1 / (math.sqrt(d) + 1) - 1 / (d + math.sqrt(d)))
    assert limits.limit_Fdiag(np.eye(d)[d - 1], g) == pytest.approx(expected, rel=1e-14)


def test_Foffdiag_values(rng):
    d = 10
    x = rng.standard_normal(d)
    x[2] = 0.0
    assert limits.limit_Foffdiag(x, 3, 7) == 0.0
    y = rng.standard_normal(d)
    flipped = y.copy()
    flipped[0] *= -1
    assert limits.limit_Foffdiag(flipped, 1, 2) == pytest.approx(-limits.limit_Foffdiag(y, 1, 2))
    pair = (np.eye(d)[0] + np.eye(d)[1]) / math.sqrt(2)
    assert limits.limit_Foffdiag(pair, 1, 2) == pytest.approx(SpecialConstants(d).c_off / 2, rel=1e-14)
    with pytest.raises(BasisIndexError):
        limits.limit_Foffdiag(y, 2, 2)


def test_remainder_bound_probe():
    d = 10
    x = np.r_[0.0, np.ones(d - 1)]
    assert limits.remainder_bound_probe("diag", x, gamma=1) == 0.0
    assert limits.remainder_bound_probe("offdiag", x, alpha=1, beta=2) == 0.0
    tail = np.r_[0.0, np.ones(d - 1)] / 3.0

    def env(r):
        return limits.remainder_bound_probe("diag", math.sqrt(r) * np.eye(d)[0] + math.sqrt(1 - r) * tail, gamma=1)

    assert env(0.1) == pytest.approx(4 * env(0.05), rel=1e-12)
    with pytest.raises(ValueError):
        limits.remainder_bound_probe("other", x)


def test_limitfn_index_validation():
    with pytest.raises(BasisIndexError):
        LimitFn("Fdiag", 6, (6,))
    with pytest.raises(BasisIndexError):
        LimitFn("Foffdiag", 6, (3, 2))
    with pytest.raises(ValueError):
        LimitFn("F9", 6)
    assert LimitFn("Foffdiag", 6, (1, 2)).label == "Foffdiag[1,2]"


KINDS = [("F0", ()), ("Fl", (2,)), ("Ftilde", (3,)), ("Fdiag", (1,)), ("Foffdiag", (2, 5))]


@settings(max_examples=60, deadline=None)
@given(
    x=st.lists(st.floats(-5, 5), min_size=7, max_size=7).filter(lambda v: np.linalg.norm(v) > 1e-3),
    c=st.floats(1e-3, 1e3),
)
def test_positive_homogeneity(x, c):
    x = np.array(x)
    for kind, idx in KINDS:
        fn = LimitFn(kind, 7, idx)
        assert fn(c * x) == pytest.approx(c * fn(x), rel=1e-10, abs=1e-12)


def test_batch_matches_single(rng):
    X = rng.standard_normal((6, 8))
    for kind, idx in KINDS:
        fn = LimitFn(kind, 8, idx)
        np.testing.assert_allclose(fn(X), [fn(x) for x in X], rtol=1e-14)


def test_no_warning_at_supported_dimension():
    with warnings.catch_warnings():
        warnings.simplefilter("error", HypothesisWarning)
        limits.limit_Fdiag(np.ones(6), 1)
        limits.limit_F0(np.ones(3))
