"""Distribution-comparison helpers shared by the tests and the verifiers.

Nothing here is specific to exclusion dynamics; it is the usual toolbox for
judging sampled laws: Wilson intervals, chi-square tests with small-bin
pooling, total-variation distances, and the sampling noise floor on an
empirical total variation.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
import math

import numpy as np
from scipy import stats as sps


def wilson_interval(k: int, n: int, conf: float = 0.99) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if not 0 <= k <= n or n == 0:
        raise ValueError(f"need 0 <= k <= n with n > 0, got k={k}, n={n}")
    z = sps.norm.ppf(0.5 + conf / 2.0)
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class EmpiricalPmf:
    """Counted samples of a discrete law."""

    counts: dict
    n: int

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalPmf":
        if isinstance(samples, np.ndarray):
            samples = samples.tolist()
        c = Counter(samples)
        return cls(counts=dict(c), n=sum(c.values()))

    def prob(self, value) -> float:
        return self.counts.get(value, 0) / self.n

    def wilson(self, value, conf: float = 0.99) -> tuple:
        return wilson_interval(self.counts.get(value, 0), self.n, conf)

    def as_dict(self) -> dict:
        return {v: c / self.n for v, c in self.counts.items()}


def tv_distance(p: dict, q: dict) -> float:
    """Total variation distance between two pmfs given as dicts."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def tv_noise_floor(probs, n: int) -> float:
    """Expected TV between the true pmf and an n-sample empirical pmf.

    Normal approximation per bin: E|phat - p| ~ sqrt(2 p (1-p) / (pi n)),
    summed and halved.  Used to budget tolerances, not to test anything.
    """
    if isinstance(probs, dict):
        probs = list(probs.values())
    return 0.5 * sum(math.sqrt(2.0 * p * (1.0 - p) / (math.pi * n)) for p in probs)


@dataclass(frozen=True)
class GofResult:
    stat: float
    dof: int
    pvalue: float
    n_bins: int


def _pool_small(observed: np.ndarray, expected: np.ndarray,
                min_expected: float) -> tuple:
    """Merge bins until every expected count reaches min_expected.

    Bins are taken in expected-count order and greedily accumulated, which
    keeps the merge deterministic whatever the category labels were.
    """
    order = np.argsort(expected, kind="stable")
    obs_pool, exp_pool = [], []
    o_acc = e_acc = 0.0
    for i in order:
        o_acc += observed[i]
        e_acc += expected[i]
        if e_acc >= min_expected:
            obs_pool.append(o_acc)
            exp_pool.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0:
        if exp_pool:
            obs_pool[-1] += o_acc
            exp_pool[-1] += e_acc
        else:
            obs_pool.append(o_acc)
            exp_pool.append(e_acc)
    return np.asarray(obs_pool, float), np.asarray(exp_pool, float)


def chi_square_gof(observed, probs, *, min_expected: float = 5.0) -> GofResult:
    """Goodness of fit of counted samples against an exact pmf.

    ``observed`` maps category to count (or is an array aligned with
    ``probs``).  Categories carrying exact probability zero must be empty;
    a count there makes the test fail outright (pvalue 0).
    """
    if isinstance(observed, dict):
        if not isinstance(probs, dict):
            raise ValueError("dict observed needs dict probs")
        keys = sorted(set(observed) | set(probs), key=repr)
        obs = np.array([observed.get(k, 0) for k in keys], dtype=float)
        exp_p = np.array([probs.get(k, 0.0) for k in keys], dtype=float)
    else:
        obs = np.asarray(observed, dtype=float)
        exp_p = np.asarray(list(probs.values()) if isinstance(probs, dict)
                           else probs, dtype=float)
        if obs.shape != exp_p.shape:
            raise ValueError("observed and probs must align")
    n = obs.sum()
    if n == 0:
        raise ValueError("no samples")
    if not math.isclose(exp_p.sum(), 1.0, rel_tol=0, abs_tol=1e-8):
        raise ValueError(f"probs sum to {exp_p.sum()}, not 1")
    impossible = exp_p <= 0
    if (obs[impossible] > 0).any():
        return GofResult(stat=math.inf, dof=0, pvalue=0.0, n_bins=0)
    obs = obs[~impossible]
    exp = exp_p[~impossible] * n
    obs_p, exp_pool = _pool_small(obs, exp, min_expected)
    dof = len(exp_pool) - 1
    if dof <= 0:
        return GofResult(stat=0.0, dof=0, pvalue=1.0, n_bins=len(exp_pool))
    stat = float(((obs_p - exp_pool) ** 2 / exp_pool).sum())
    return GofResult(stat=stat, dof=dof, pvalue=float(sps.chi2.sf(stat, dof)),
                     n_bins=len(exp_pool))


def chi_square_twosample(counts_a: dict, counts_b: dict, *,
                         min_expected: float = 5.0) -> GofResult:
    """Homogeneity test for two independently counted sample sets.

    Builds the 2 x k contingency table over the union of categories, pools
    columns whose expected count under homogeneity is small, then runs the
    standard chi-square independence test.
    """
    keys = sorted(set(counts_a) | set(counts_b), key=repr)
    a = np.array([counts_a.get(k, 0) for k in keys], dtype=float)
    b = np.array([counts_b.get(k, 0) for k in keys], dtype=float)
    na, nb = a.sum(), b.sum()
    if na == 0 or nb == 0:
        raise ValueError("both sample sets must be nonempty")
    expected_col = (a + b) * min(na, nb) / (na + nb)
    a_p, _ = _pool_small(a, expected_col, min_expected)
    b_p, _ = _pool_small(b, expected_col, min_expected)
    table = np.vstack([a_p, b_p])
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    if table.shape[1] < 2:
        return GofResult(stat=0.0, dof=0, pvalue=1.0, n_bins=table.shape[1])
    stat, pvalue, dof, _ = sps.chi2_contingency(table, correction=False)
    return GofResult(stat=float(stat), dof=int(dof), pvalue=float(pvalue),
                     n_bins=table.shape[1])


def independence_test(pairs, *, min_expected: float = 5.0) -> GofResult:
    """Chi-square independence test on a sampled pair of discrete variables."""
    rows = sorted({a for a, _ in pairs}, key=repr)
    cols = sorted({b for _, b in pairs}, key=repr)
    table = np.zeros((len(rows), len(cols)), dtype=float)
    ri = {r: i for i, r in enumerate(rows)}
    ci = {c: j for j, c in enumerate(cols)}
    for a, b in pairs:
        table[ri[a], ci[b]] += 1
    # merge sparse rows/columns so the asymptotics are trustworthy
    def merge(t):
        while t.shape[0] > 2:
            margins = t.sum(axis=1)
            i = int(np.argmin(margins))
            if (t[i].sum() * t.sum(axis=0) / t.sum() >= min_expected).all():
                break
            j = int(np.argmin(np.where(np.arange(len(margins)) == i, np.inf, margins)))
            t[j] += t[i]
            t = np.delete(t, i, axis=0)
        return t

    table = merge(table)
    table = merge(table.T).T
    if table.shape[0] < 2 or table.shape[1] < 2:
        return GofResult(stat=0.0, dof=0, pvalue=1.0, n_bins=table.size)
    stat, pvalue, dof, _ = sps.chi2_contingency(table, correction=False)
    return GofResult(stat=float(stat), dof=int(dof), pvalue=float(pvalue),
                     n_bins=table.size)
