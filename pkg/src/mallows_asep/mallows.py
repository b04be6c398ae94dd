"""Samplers and exact laws for q-weighted random permutations.

The finite sampler draws a permutation of 1..n with probability proportional
to q^inversions.  The infinite sampler produces the first m values of the
one-sided infinite version, built letter by letter: at each step a geometric
rank picks the next unused positive integer, smallest integers most likely.

``height_pmf`` is the exact law of how many of the first L values fall among
the lowest K letters; ``sample_color_word`` realizes the same quantity as a
two-letter word drawn sequentially, and ``mallows_subset`` uses that word to
select the K lowest-ranked elements of a decreasing site list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .qcomb import check_q

__all__ = [
    "InsufficientPrefixError",
    "LazyWord",
    "MallowsPrefix",
    "HeightPmf",
    "ColorWord",
    "ColorWordSampler",
    "sample_finite",
    "sample_infinite_prefix",
    "height_pmf",
    "cached_height_probs",
    "height_pmf_multi",
    "sample_color_word",
    "mallows_subset",
]


class InsufficientPrefixError(RuntimeError):
    """Raised when a finite site list is exhausted before K picks are made.

    ``still_needed`` tells the caller how many more low letters are missing,
    so it can extend the site list and retry.
    """

    def __init__(self, still_needed: int):
        self.still_needed = int(still_needed)
        super().__init__(
            f"site list exhausted with {self.still_needed} selections still to make"
        )


def _truncated_geometric(q: float, m: int, u: float) -> int:
    """Value in 1..m with P(i) proportional to q^(i-1), from uniform u."""
    if m == 1 or q == 0.0:
        return 1
    # P(X <= i) = (1 - q^i) / (1 - q^m); invert at u
    i = 1 + math.floor(math.log1p(-u * (1.0 - q ** m)) / math.log(q))
    if i < 1:
        return 1
    return min(i, m)


def sample_finite(n: int, q, rng) -> tuple:
    """Draw a permutation of 1..n with probability q^inv(w) / normalizer.

    Sequential construction: the k-th value is the r-th smallest unused
    integer, where r is truncated-geometric on 1..n-k+1.
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    qf = float(check_q(q))
    remaining = list(range(1, n + 1))
    out = []
    while remaining:
        r = _truncated_geometric(qf, len(remaining), rng.random())
        out.append(remaining.pop(r - 1))
    return tuple(out)


class _Fenwick:
    """Binary indexed tree over 1..size, initialized to all ones."""

    def __init__(self, size: int):
        self.size = size
        self.count = size
        # all-ones initialization: node i covers i & -i leaves
        self.tree = [0] + [i & -i for i in range(1, size + 1)]
        self._log = size.bit_length()

    def remove(self, i: int) -> None:
        self.count -= 1
        while i <= self.size:
            self.tree[i] -= 1
            i += i & -i

    def select(self, rank: int) -> int:
        """Position of the rank-th remaining one (1-indexed rank)."""
        pos = 0
        rem = rank
        step = 1 << self._log
        while step:
            nxt = pos + step
            if nxt <= self.size and self.tree[nxt] < rem:
                rem -= self.tree[nxt]
                pos = nxt
            step >>= 1
        return pos + 1


class LazyWord:
    """The unused letters of the infinite alphabet 1, 2, 3, ..., indexable by
    rank.  Capacity grows geometrically when a rank points past the currently
    materialized range, so memory tracks what was actually touched.
    """

    def __init__(self, capacity_hint: int = 64):
        cap = 1
        while cap < max(capacity_hint, 8):
            cap <<= 1
        self._fen = _Fenwick(cap)
        self._removed: list[int] = []

    @property
    def used(self) -> list[int]:
        return list(self._removed)

    def _grow(self) -> None:
        newfen = _Fenwick(self._fen.size * 2)
        for v in self._removed:
            newfen.remove(v)
        self._fen = newfen

    def take(self, rank: int) -> int:
        """Remove and return the rank-th smallest unused letter."""
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        while rank > self._fen.count:
            self._grow()
        v = self._fen.select(rank)
        self._fen.remove(v)
        self._removed.append(v)
        return v


@dataclass
class MallowsPrefix:
    """First ``len(values)`` letters of an infinite q-weighted permutation.

    ``word`` holds the unused-letter structure so the prefix can be extended
    in place with the same distributional semantics.
    """

    values: list[int]
    q: float
    word: LazyWord = field(repr=False)

    def extend(self, extra: int, rng) -> "MallowsPrefix":
        for _ in range(extra):
            self.values.append(self.word.take(_geometric_rank(self.q, rng)))
        return self

    def __len__(self) -> int:
        return len(self.values)


def _geometric_rank(q: float, rng) -> int:
    if q == 0.0:
        return 1
    return int(rng.geometric(1.0 - q))


def sample_infinite_prefix(m: int, q, rng) -> MallowsPrefix:
    """First m values of the infinite sampler.

    Each step draws a geometric rank (success probability 1-q, support
    1, 2, ...) and emits the letter with that rank among the unused ones.
    """
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m}")
    qf = float(check_q(q))
    hint = m + 8
    if qf > 0.0:
        hint += int(24.0 / (1.0 - qf))
    word = LazyWord(hint)
    prefix = MallowsPrefix(values=[], q=qf, word=word)
    return prefix.extend(m, rng)


# ---------------------------------------------------------------------------
# height law


@dataclass(frozen=True)
class HeightPmf:
    """Law of the low-letter count, supported on 0..min(K, L).

    ``probs[s]`` is the probability that exactly s of the first L letters
    carry one of the K lowest colors.  Entries are floats or Fractions
    depending on how q was passed.
    """

    K: int
    L: int
    q: object
    probs: tuple

    def __post_init__(self):
        total = sum(self.probs)
        if isinstance(total, Fraction):
            if total != 1:
                raise AssertionError(f"exact pmf sums to {total}, not 1")
        elif not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-10):
            raise AssertionError(f"pmf sums to {total}, off by {total - 1.0}")

    @property
    def support(self) -> range:
        return range(0, min(self.K, self.L) + 1)

    def __getitem__(self, s: int):
        if 0 <= s < len(self.probs):
            return self.probs[s]
        return 0 * self.probs[0]

    def as_dict(self) -> dict:
        return {s: self.probs[s] for s in self.support}

    def as_array(self) -> np.ndarray:
        return np.asarray([float(p) for p in self.probs])

    def sample(self, rng, size=None):
        cdf = np.cumsum(self.as_array())
        cdf[-1] = 1.0
        if size is None:
            return int(np.searchsorted(cdf, rng.random(), side="right"))
        return np.searchsorted(cdf, rng.random(size), side="right")


def _height_probs_exact(K: int, L: int, q: Fraction) -> tuple:
    out = []
    for s in range(0, min(K, L) + 1):
        num = q ** ((K - s) * (L - s))
        for i in range(s):
            num *= (1 - q ** (K - i)) * (1 - q ** (L - i))
        den = Fraction(1)
        for i in range(1, s + 1):
            den *= 1 - q ** i
        out.append(num / den)
    return tuple(out)


def _height_probs_float(K: int, L: int, q: float) -> tuple:
    smax = min(K, L)
    if q == 0.0:
        return tuple(1.0 if s == smax else 0.0 for s in range(smax + 1))
    lq = math.log(q)
    out = []
    acc = 0.0  # running sum of the s-dependent log factors
    for s in range(smax + 1):
        if s > 0:
            acc += (
                math.log1p(-q ** (K - s + 1))
                + math.log1p(-q ** (L - s + 1))
                - math.log1p(-q ** s)
            )
        out.append(math.exp((K - s) * (L - s) * lq + acc))
    return tuple(out)


def height_pmf(K: int, L: int, q) -> HeightPmf:
    """Exact law of the low-letter count among the first L letters.

    Pass q as a Fraction for exact rational probabilities.  The law is
    symmetric in K and L.
    """
    if K < 0 or L < 0:
        raise ValueError(f"K and L must be nonnegative, got K={K}, L={L}")
    q = check_q(q)
    if isinstance(q, Fraction):
        probs = _height_probs_exact(K, L, q)
    else:
        probs = _height_probs_float(K, L, float(q))
    return HeightPmf(K=K, L=L, q=q, probs=probs)


@lru_cache(maxsize=4096)
def cached_height_probs(K: int, L: int, q: float) -> np.ndarray:
    """Float probability vector of :func:`height_pmf`, cached and read-only."""
    arr = height_pmf(K, L, q).as_array()
    arr.setflags(write=False)
    return arr


def height_pmf_multi(K: int, lengths, q) -> dict:
    """Joint law of low-letter counts over nested prefixes.

    ``lengths`` is a nondecreasing sequence (L_1, ..., L_r); the value at key
    (s_1, ..., s_r) is the probability that the first L_j letters contain
    exactly s_j low letters, for every j at once.  The joint law factorizes
    into one-window laws over the successive increments, with the low-letter
    budget decremented by what earlier windows consumed.
    """
    lengths = [int(L) for L in lengths]
    if any(L < 0 for L in lengths):
        raise ValueError(f"window ends must be nonnegative: {lengths}")
    if any(a > b for a, b in zip(lengths, lengths[1:])):
        raise ValueError(f"window ends must be nondecreasing: {lengths}")
    if K < 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    q = check_q(q)
    increments = [b - a for a, b in zip([0] + lengths, lengths)]

    out: dict[tuple, object] = {}

    def rec(budget: int, idx: int, total: int, prefix: tuple, weight) -> None:
        if idx == len(increments):
            if weight != 0:
                out[prefix] = weight
            return
        inc = increments[idx]
        factor = height_pmf(budget, inc, q)
        for s in factor.support:
            rec(budget - s, idx + 1, total + s, prefix + (total + s,),
                weight * factor[s])

    one = q ** 0
    rec(K, 0, 0, (), one)
    return out


# ---------------------------------------------------------------------------
# color words


@dataclass
class ColorWord:
    """A two-letter word recording which of L positions got a low color.

    ``low[i]`` is True where position i consumed one unit of the low-color
    budget; ``budget_after[i]`` is the budget once position i is decided.
    """

    low: np.ndarray
    budget_after: np.ndarray
    K: int
    q: float

    @property
    def alpha_count(self) -> int:
        return int(self.low.sum())


def sample_color_word(K: int, L: int, q, rng) -> ColorWord:
    """Draw the word position by position.

    With budget b remaining, a position is low with probability 1 - q^b and
    the budget drops by one; otherwise it is high and the budget stands.
    The low count is distributed as :func:`height_pmf`.
    """
    if K < 0 or L < 0:
        raise ValueError(f"K and L must be nonnegative, got K={K}, L={L}")
    qf = float(check_q(q))
    low = np.zeros(L, dtype=bool)
    after = np.empty(L, dtype=np.int64)
    b = K
    for i in range(L):
        if b > 0 and rng.random() < 1.0 - qf ** b:
            low[i] = True
            b -= 1
        after[i] = b
    return ColorWord(low=low, budget_after=after, K=K, q=qf)


class ColorWordSampler:
    """Low-letter counter that skips runs instead of visiting each position.

    From budget b the number of consecutive low letters before the next high
    one has survival function exp(W[b] - W[b-j]) with W the cumulative
    log-ladder of low probabilities; a single uniform inverts it with a
    binary search.  Cost per draw is O(high letters * log K) after an O(K)
    setup shared across draws, which is what makes near-critical q with
    budgets in the millions affordable.
    """

    def __init__(self, K: int, q):
        if K < 0:
            raise ValueError(f"K must be nonnegative, got {K}")
        self.K = int(K)
        self.q = float(check_q(q))
        j = np.arange(1, self.K + 1, dtype=np.float64)
        with np.errstate(divide="ignore"):
            steps = np.log1p(-np.power(self.q, j))
        self.W = np.concatenate([[0.0], np.cumsum(steps)])
        self._negW = -self.W  # ascending, for searchsorted

    def alpha_count(self, L: int, rng) -> int:
        """One draw of the low-letter count of a length-L word."""
        if L < 0:
            raise ValueError(f"L must be nonnegative, got {L}")
        b = self.K
        remaining = L
        count = 0
        while remaining > 0 and b > 0:
            u = rng.random()
            if u <= 0.0:
                u = 5e-324
            c = self.W[b] - math.log(u)
            # run length N = b - x0, x0 the smallest x with W[x] < c
            x0 = int(np.searchsorted(self._negW[: b + 1], -c, side="right"))
            run = b - x0
            if run >= remaining:
                return count + remaining
            count += run
            b -= run
            remaining -= run + 1  # the run, then one high letter
        return count


def mallows_subset(sites, K: int, q, rng) -> list[int]:
    """Select the K sites carrying the lowest colors from a decreasing scan.

    ``sites`` is any iterable of strictly decreasing integers, consumed
    lazily; for the half-line 0, -1, -2, ... pass ``itertools.count(0, -1)``.
    Site i of the scan is kept with probability 1 - q^b where b is the
    remaining budget, mirroring :func:`sample_color_word`.  Raises
    :class:`InsufficientPrefixError` if the iterable ends early.
    """
    if K < 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    qf = float(check_q(q))
    chosen: list[int] = []
    if K == 0:
        return chosen
    b = K
    prev = None
    for z in sites:
        z = int(z)
        if prev is not None and z >= prev:
            raise ValueError(f"sites must be strictly decreasing, got {prev} then {z}")
        prev = z
        if rng.random() < 1.0 - qf ** b:
            chosen.append(z)
            b -= 1
            if b == 0:
                return chosen
    raise InsufficientPrefixError(b)
