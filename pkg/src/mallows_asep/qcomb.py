"""q-deformed combinatorial primitives.

Everything here is generic over the numeric type of ``q``: pass a float for
double-precision work, or a ``fractions.Fraction`` to stay in exact rational
arithmetic (the oracle tests rely on the exact path).  Permutations are plain
tuples of the integers ``1..n``, one-line notation, as in ``(2, 4, 1, 3)``
meaning ``w(1)=2, w(2)=4, ...``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


class QParam(float):
    """Deformation parameter, restricted to ``0 <= q < 1`` at construction.

    Behaves as a plain float everywhere else.

    >>> QParam(0.5)
    0.5
    >>> QParam(1.0)
    Traceback (most recent call last):
        ...
    ValueError: q must satisfy 0 <= q < 1, got 1.0
    """

    def __new__(cls, value):
        v = float(value)
        if not 0.0 <= v < 1.0:
            raise ValueError(f"q must satisfy 0 <= q < 1, got {v}")
        return super().__new__(cls, v)


def check_q(q):
    """Validate ``q`` and return it unchanged (Fraction stays Fraction)."""
    if isinstance(q, Fraction):
        if not Fraction(0) <= q < Fraction(1):
            raise ValueError(f"q must satisfy 0 <= q < 1, got {q}")
        return q
    return QParam(q)


def check_permutation(w) -> tuple:
    """Return ``w`` as a tuple after checking it is a bijection of 1..n."""
    w = tuple(w)
    n = len(w)
    if sorted(w) != list(range(1, n + 1)):
        raise ValueError(f"not a permutation of 1..{n}: {w}")
    return w


def q_pochhammer(q, n: int):
    """The product (1-q)(1-q^2)...(1-q^n).

    >>> q_pochhammer(0.5, 2)
    0.375
    >>> q_pochhammer(Fraction(1, 2), 2)
    Fraction(3, 8)
    """
    q = check_q(q)
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    one = q ** 0  # 1 in the arithmetic of q
    out = one
    p = one
    for _ in range(n):
        p = p * q
        out = out * (one - p)
    return out


def q_binomial(n: int, k: int, q):
    """Gaussian binomial coefficient via the Pochhammer quotient.

    Equals the generating polynomial of subset inversions evaluated at q
    (see :func:`q_binomial_inversion_poly`), and degrades gracefully to the
    ordinary binomial as q -> 1 from below.

    >>> q_binomial(4, 2, 0.5)
    2.1875
    >>> q_binomial(4, 2, Fraction(1, 2))
    Fraction(35, 16)
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    q = check_q(q)
    if q == 0:
        return q ** 0
    # Quotient of partial products, accumulated factor by factor so no
    # intermediate is astronomically large or small for n ~ 60.
    one = q ** 0
    out = one
    for j in range(1, k + 1):
        out = out * (one - q ** (n - k + j)) / (one - q ** j)
    return out


def q_binomial_inversion_poly(n: int, k: int, q):
    """Sum of q^(inversions) over binary words with k ones among n letters.

    Brute-force enumeration; exponential in n, intended for cross-checks at
    n <= 12 or so.  An inversion is a one strictly left of a zero.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    q = check_q(q)
    total = q ** 0 - q ** 0  # 0 in the arithmetic of q
    for ones in itertools.combinations(range(n), k):
        # each one at position i contributes the zeros strictly to its right
        inv = 0
        for before, i in enumerate(ones):
            inv += (n - k) - (i - before)
        total = total + q ** inv
    return total


def inversions(w) -> int:
    """Number of pairs i < j with w(i) > w(j).

    >>> inversions((2, 4, 1, 3))
    3
    >>> inversions((1, 2, 3))
    0
    """
    w = tuple(w)
    n = len(w)
    return sum(1 for i in range(n) for j in range(i + 1, n) if w[i] > w[j])


def max_inversions(n: int) -> int:
    return n * (n - 1) // 2


def mallows_normalizer(n: int, q):
    """Normalizing constant: prod over j=1..n of (1-q)/(1-q^j)."""
    q = check_q(q)
    one = q ** 0
    out = one
    for j in range(1, n + 1):
        out = out * (one - q) / (one - q ** j)
    return out


def mallows_pmf_finite(w, q):
    """Probability of the permutation ``w`` of 1..n, proportional to q^inv(w).

    >>> mallows_pmf_finite((1, 2), 0.5)
    0.6666666666666666
    >>> mallows_pmf_finite((2, 1), Fraction(1, 2))
    Fraction(1, 3)
    """
    w = check_permutation(w)
    q = check_q(q)
    return q ** inversions(w) * mallows_normalizer(len(w), q)
