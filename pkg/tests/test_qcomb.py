from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mallows_asep.qcomb import (
    check_permutation,
    check_q,
    inversions,
    mallows_normalizer,
    mallows_pmf_finite,
    max_inversions,
    q_binomial,
    q_binomial_inversion_poly,
    q_pochhammer,
)

from oracles import brute_inversions, mallows_pmf_exhaustive

HALF = Fraction(1, 2)


def test_check_q_accepts_unit_interval():
    assert check_q(0) == 0
    assert check_q(0.75) == 0.75
    v = check_q(HALF)
    assert v == HALF and isinstance(v, Fraction)


@pytest.mark.parametrize("bad", [-0.1, 1.0, 1.0000001, Fraction(7, 5), -1])
def test_check_q_rejects_outside(bad):
    with pytest.raises(ValueError):
        check_q(bad)


def test_pochhammer_values():
    assert q_pochhammer(0.5, 2) == 0.375
    assert q_pochhammer(HALF, 2) == Fraction(3, 8)
    assert q_pochhammer(0.3, 0) == 1
    # q = 0 makes every factor 1
    assert q_pochhammer(0, 7) == 1


def test_q_binomial_known_value():
    assert q_binomial(4, 2, HALF) == Fraction(35, 16)
    assert q_binomial(4, 2, 0.5) == pytest.approx(35 / 16)


@pytest.mark.parametrize("n", range(0, 9))
def test_q_binomial_matches_inversion_polynomial(n):
    q = Fraction(1, 3)
    for k in range(n + 1):
        assert q_binomial(n, k, q) == q_binomial_inversion_poly(n, k, q)


def test_q_binomial_pascal():
    q = Fraction(2, 7)
    for n in range(1, 8):
        for k in range(1, n):
            lhs = q_binomial(n, k, q)
            assert lhs == q_binomial(n - 1, k - 1, q) + q ** k * q_binomial(n - 1, k, q)
            assert lhs == q ** (n - k) * q_binomial(n - 1, k - 1, q) + q_binomial(n - 1, k, q)


def test_q_binomial_degenerate_q():
    # at q = 0 every quotient factor collapses to 1
    assert q_binomial(9, 4, 0) == 1
    assert q_binomial(9, 0, 0.5) == 1
    assert q_binomial(9, 9, 0.5) == 1


@pytest.mark.parametrize("n,k", [(3, 4), (3, -1), (-1, 0)])
def test_q_binomial_rejects_bad_indices(n, k):
    with pytest.raises(ValueError):
        q_binomial(n, k, 0.5)


def test_inversions_known():
    assert inversions((2, 4, 1, 3)) == 3
    assert inversions((1, 2, 3)) == 0
    assert inversions((3, 2, 1)) == max_inversions(3) == 3


@given(st.permutations(list(range(1, 8))))
def test_inversions_matches_brute_force(w):
    assert inversions(tuple(w)) == brute_inversions(w)


@pytest.mark.parametrize("n", range(1, 6))
def test_normalizer_inverts_weight_sum(n):
    # the constant times the total inversion weight must give exactly 1
    q = Fraction(2, 5)
    total = sum(q ** inversions(w) for w in mallows_pmf_exhaustive(n, q))
    assert mallows_normalizer(n, q) * total == 1


def test_pmf_finite_known_values():
    assert mallows_pmf_finite((1, 2), HALF) == Fraction(2, 3)
    assert mallows_pmf_finite((2, 1), HALF) == Fraction(1, 3)


@pytest.mark.parametrize("n", range(1, 6))
@pytest.mark.parametrize("q", [Fraction(0), Fraction(3, 10), Fraction(7, 10)])
def test_pmf_finite_matches_exhaustive(n, q):
    exact = mallows_pmf_exhaustive(n, q)
    for w, p in exact.items():
        assert mallows_pmf_finite(w, q) == p
    assert sum(exact.values()) == 1


@settings(max_examples=30)
@given(st.permutations(list(range(1, 7))), st.integers(0, 9))
def test_pmf_finite_ratio_is_inversion_power(w, qnum):
    # adjacent transpositions change the weight by exactly one factor of q
    q = Fraction(qnum, 10)
    w = tuple(w)
    swapped = (w[1], w[0]) + w[2:]
    dinv = inversions(swapped) - inversions(w)
    assert dinv in (-1, 1)
    if q != 0:
        assert mallows_pmf_finite(swapped, q) == mallows_pmf_finite(w, q) * q ** dinv


@pytest.mark.parametrize("bad", [(1, 1), (0, 1), (2, 3), (1.5, 2.5)])
def test_check_permutation_rejects(bad):
    with pytest.raises(ValueError):
        check_permutation(bad)


def test_check_permutation_accepts_lists():
    assert check_permutation([3, 1, 2]) == (3, 1, 2)
