"""Chunked replica drivers over the compiled kernels.

Replicas are processed in fixed chunks of ``CHUNK``; chunk c of a run gets
its per-replica seed words from the (kind, c) spawn of the master seed, so
results are reproducible replica by replica and independent of how many
chunks run, or in which process.  Merging is by chunk index, which keeps
output identical under n_jobs > 1.

Every chunk is re-checked after the kernel: particle rows must stay
strictly increasing inside the window, colored rows must keep the same
color multiset.  The checks are numpy work per chunk and cost nothing next
to the event loops.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import itertools
import math

import numpy as np

from . import _kernels
from ._rng import seed_words, stream
from .asep import HOLE, influence_radius, window_for
from .mallows import mallows_subset, sample_infinite_prefix
from .qcomb import check_q

CHUNK = 4096

_SK_BOND = 101
_SK_PARTICLE = 102
_SK_PREFIX = 103
_SK_SUBSET = 104


def _tasks(n_rep):
    return [(c0 // CHUNK, c0, min(CHUNK, n_rep - c0))
            for c0 in range(0, n_rep, CHUNK)]


def _run_tasks(fn, args_list, n_jobs):
    if n_jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, *zip(*args_list)))


@dataclass(frozen=True)
class HeightSamples:
    """Time-t height counts of single-species step data, one row per replica."""

    window: tuple
    xs: tuple
    heights: np.ndarray
    touched: np.ndarray

    @property
    def touched_frac(self) -> float:
        return float(self.touched.mean()) if self.touched.size else 0.0


@dataclass(frozen=True)
class PositionSamples:
    """Final positions of a fixed finite particle set, one row per replica."""

    window: tuple
    starts: tuple
    finals: np.ndarray
    touched: np.ndarray

    @property
    def touched_frac(self) -> float:
        return float(self.touched.mean()) if self.touched.size else 0.0


@dataclass(frozen=True)
class AlphaSamples:
    """Low-color counts among the rightmost particles of colored step data.

    alphas[i, j] counts colors <= K among the lengths[j] rightmost particles
    of replica i at time t; fronts[i] is the rightmost occupied site, kept
    so the color readout can be cross-tabulated against the front position.
    """

    window: tuple
    K: int
    lengths: tuple
    alphas: np.ndarray
    fronts: np.ndarray
    touched: np.ndarray

    @property
    def touched_frac(self) -> float:
        return float(self.touched.mean()) if self.touched.size else 0.0


@dataclass(frozen=True)
class SubsetSamples:
    """Endpoint data of K particles started from a Mallows subset of Z_<=0.

    Windows are sized per chunk from the drawn starts (the subset has no
    deterministic lower bound), so only the truncation radius is recorded.
    """

    K: int
    xs: tuple
    radius: int
    starts: np.ndarray
    finals: np.ndarray
    heights: np.ndarray
    touched: np.ndarray

    @property
    def touched_frac(self) -> float:
        return float(self.touched.mean()) if self.touched.size else 0.0


@dataclass(frozen=True)
class StateCodes:
    """Encoded final states of a fixed small colored window."""

    window: tuple
    palette: tuple
    codes: np.ndarray
    touched: np.ndarray

    @property
    def touched_frac(self) -> float:
        return float(self.touched.mean()) if self.touched.size else 0.0


def encode_states(colors_rows: np.ndarray, palette) -> np.ndarray:
    """Mixed-radix code of each row over the sorted palette of site values."""
    palette = np.asarray(sorted(palette), dtype=np.int64)
    idx = np.searchsorted(palette, colors_rows)
    if not np.array_equal(palette[idx.clip(max=len(palette) - 1)], colors_rows):
        raise ValueError("row contains a value outside the palette")
    base = np.int64(len(palette))
    codes = np.zeros(colors_rows.shape[0], dtype=np.int64)
    for col in range(colors_rows.shape[1]):
        codes = codes * base + idx[:, col]
    return codes


def _check_colored_chunk(before: np.ndarray, after: np.ndarray):
    if not np.array_equal(np.sort(before, axis=1), np.sort(after, axis=1)):
        raise AssertionError("kernel changed a color multiset")


def _check_particle_chunk(rows: np.ndarray, lo: int, hi: int):
    if rows.shape[1] > 1 and not (np.diff(rows, axis=1) > 0).all():
        raise AssertionError("kernel broke exclusion")
    if rows.size and (rows.min() < lo or rows.max() > hi):
        raise AssertionError("kernel left the window")


def _step_chunk(c_idx, size, lo, hi, q, t, master_seed):
    template = np.where(np.arange(lo, hi + 1) <= 0, 1, HOLE).astype(np.int64)
    rows = np.tile(template, (size, 1))
    seeds = seed_words(master_seed, _SK_BOND, c_idx, n=size)
    touched = _kernels.bond_endpoint_chunk(rows, q, t, seeds)
    _check_colored_chunk(np.tile(template, (size, 1)), rows)
    occ_right = np.cumsum((rows != HOLE)[:, ::-1], axis=1)[:, ::-1]
    return occ_right, touched


def step_height_samples(t, q, xs, n_rep, master_seed, *, tol=1e-8,
                        window=None, n_jobs=1) -> HeightSamples:
    """Monte Carlo heights of step data at each x in xs, n_rep replicas."""
    qf = float(check_q(q))
    xs = tuple(float(x) for x in xs)
    if window is None:
        window = window_for(t, xs, tol, qf)
    lo, hi = window
    if not lo <= 0 <= hi:
        raise ValueError(f"window [{lo}, {hi}] must contain the origin")
    cols = []
    for x in xs:
        lvl = math.ceil(x)
        if not lo <= lvl <= hi:
            raise ValueError(f"observation site {lvl} outside window [{lo}, {hi}]")
        cols.append(lvl - lo)
    out = _run_tasks(_step_chunk,
                     [(ci, size, lo, hi, qf, float(t), master_seed)
                      for ci, _, size in _tasks(n_rep)],
                     n_jobs)
    heights = np.concatenate([occ[:, cols] for occ, _ in out], axis=0)
    touched = np.concatenate([tch for _, tch in out])
    return HeightSamples(window=window, xs=xs, heights=heights, touched=touched)


def _particle_chunk(c_idx, size, starts, lo, hi, q, t, master_seed):
    rows = np.tile(np.asarray(starts, dtype=np.int64), (size, 1))
    seeds = seed_words(master_seed, _SK_PARTICLE, c_idx, n=size)
    touched = _kernels.particle_endpoint_chunk(rows, lo, hi, q, t, seeds)
    _check_particle_chunk(rows, lo, hi)
    return rows, touched


def particle_position_samples(starts, t, q, n_rep, master_seed, *, tol=1e-8,
                              window=None, n_jobs=1) -> PositionSamples:
    """Monte Carlo endpoint positions of finitely many particles."""
    qf = float(check_q(q))
    starts = tuple(int(s) for s in starts)
    if not starts:
        raise ValueError("need at least one particle")
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise ValueError("starts must be strictly increasing")
    if window is None:
        d = influence_radius(t, tol, qf)
        window = (min(starts) - d, max(starts) + d)
    lo, hi = window
    if not (lo <= starts[0] and starts[-1] <= hi):
        raise ValueError(f"starts leave window [{lo}, {hi}]")
    out = _run_tasks(_particle_chunk,
                     [(ci, size, starts, lo, hi, qf, float(t), master_seed)
                      for ci, _, size in _tasks(n_rep)],
                     n_jobs)
    finals = np.concatenate([rows for rows, _ in out], axis=0)
    touched = np.concatenate([tch for _, tch in out])
    return PositionSamples(window=window, starts=starts, finals=finals,
                           touched=touched)


def _colored_chunk(c_idx, size, lo, hi, q, t, master_seed, K, lengths):
    m = -lo + 1
    rng = stream(master_seed, _SK_PREFIX, c_idx)
    rows = np.full((size, hi - lo + 1), HOLE, dtype=np.int64)
    for r in range(size):
        values = sample_infinite_prefix(m, q, rng).values
        rows[r, :m] = np.asarray(values[::-1], dtype=np.int64)  # site -j at index m-1-j
    before = rows.copy()
    seeds = seed_words(master_seed, _SK_BOND, c_idx, n=size)
    touched = _kernels.bond_endpoint_chunk(rows, q, t, seeds)
    _check_colored_chunk(before, rows)
    rev = rows[:, ::-1]
    prank = np.cumsum(rev != HOLE, axis=1)
    if (prank[:, -1] < max(lengths)).any():
        raise AssertionError("fewer particles than the longest readout")
    alphas = np.empty((size, len(lengths)), dtype=np.int64)
    for j, L in enumerate(lengths):
        alphas[:, j] = ((rev <= K) & (prank <= L)).sum(axis=1)
    fronts = hi - np.argmax(rev != HOLE, axis=1)
    return alphas, fronts, touched


def colored_alpha_samples(K, lengths, t, q, n_rep, master_seed, *, tol=1e-8,
                          margin=0, extra_radius=0, n_jobs=1) -> AlphaSamples:
    """Low-color counts among rightmost particles of Mallows colored step data.

    The color budget is K; for each window length L in lengths the readout
    is the number of the L rightmost particles at time t whose color is at
    most K.  All lengths share replicas.  extra_radius widens the window on
    both ends past the influence radius, for truncation doubling checks.
    """
    qf = float(check_q(q))
    K = int(K)
    lengths = tuple(int(L) for L in lengths)
    if K < 0 or min(lengths) < 1:
        raise ValueError("need K >= 0 and window lengths >= 1")
    d = influence_radius(t, tol, qf) + int(extra_radius)
    lo = -(max(lengths) + d + int(margin))
    hi = d
    out = _run_tasks(_colored_chunk,
                     [(ci, size, lo, hi, qf, float(t), master_seed, K, lengths)
                      for ci, _, size in _tasks(n_rep)],
                     n_jobs)
    alphas = np.concatenate([a for a, _, _ in out], axis=0)
    fronts = np.concatenate([f for _, f, _ in out])
    touched = np.concatenate([tch for _, _, tch in out])
    return AlphaSamples(window=(lo, hi), K=K, lengths=lengths, alphas=alphas,
                        fronts=fronts, touched=touched)


def _subset_chunk(c_idx, size, K, q, t, master_seed, levels, d):
    rng = stream(master_seed, _SK_SUBSET, c_idx)
    rows = np.empty((size, K), dtype=np.int64)
    for r in range(size):
        picked = mallows_subset(itertools.count(0, -1), K, q, rng)
        rows[r] = picked[::-1]  # ascending, kernel order
    starts = rows.copy()
    # Levels outside the window read an exact 0 or K; the window itself only
    # has to cover the starts, the origin, and any level in between.
    lo = int(rows.min()) - d
    hi = max((0, *levels)) + d
    seeds = seed_words(master_seed, _SK_PARTICLE, c_idx, n=size)
    touched = _kernels.particle_endpoint_chunk(rows, lo, hi, q, t, seeds)
    _check_particle_chunk(rows, lo, hi)
    heights = np.empty((size, len(levels)), dtype=np.int64)
    for j, lvl in enumerate(levels):
        heights[:, j] = (rows >= lvl).sum(axis=1)
    return starts, rows, heights, touched


def mallows_particle_samples(K, q, t, n_rep, master_seed, *, xs=(),
                             tol=1e-8, extra_radius=0, n_jobs=1) -> SubsetSamples:
    """Endpoint samples of the K lowest-color sites of Z_<=0, run for time t.

    Each replica draws its own starting subset, then evolves it with the
    K-particle kernel.  The window covers every drawn start and every
    height readout level with the influence radius to spare; heights[i, j]
    counts particles of replica i weakly right of xs[j] at time t.
    extra_radius widens the window further, for truncation doubling checks.
    """
    qf = float(check_q(q))
    K = int(K)
    if K < 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    xs = tuple(float(x) for x in xs)
    levels = tuple(math.ceil(x) for x in xs)
    d = influence_radius(t, tol, qf) + int(extra_radius)
    if K == 0:
        return SubsetSamples(K=0, xs=xs, radius=d,
                             starts=np.empty((n_rep, 0), dtype=np.int64),
                             finals=np.empty((n_rep, 0), dtype=np.int64),
                             heights=np.zeros((n_rep, len(xs)), dtype=np.int64),
                             touched=np.zeros(n_rep, dtype=bool))
    out = _run_tasks(_subset_chunk,
                     [(ci, size, K, qf, float(t), master_seed, levels, d)
                      for ci, _, size in _tasks(n_rep)],
                     n_jobs)
    starts = np.concatenate([s for s, _, _, _ in out], axis=0)
    finals = np.concatenate([f for _, f, _, _ in out], axis=0)
    heights = np.concatenate([h for _, _, h, _ in out], axis=0)
    touched = np.concatenate([tch for _, _, _, tch in out])
    return SubsetSamples(K=K, xs=xs, radius=d, starts=starts, finals=finals,
                         heights=heights, touched=touched)


def _codes_chunk(c_idx, size, colors0, q, t, master_seed, palette):
    rows = np.tile(colors0, (size, 1))
    seeds = seed_words(master_seed, _SK_BOND, c_idx, n=size)
    touched = _kernels.bond_endpoint_chunk(rows, q, t, seeds)
    _check_colored_chunk(np.tile(colors0, (size, 1)), rows)
    return encode_states(rows, palette), touched


def endpoint_state_codes(colors0, t, q, n_rep, master_seed, *,
                         n_jobs=1) -> StateCodes:
    """Final-state codes of a fixed colored window, for law comparisons.

    No truncation padding is added: the window is taken as the model, exact
    generator and simulation alike, so edge effects cancel in comparisons.
    """
    qf = float(check_q(q))
    colors0 = np.asarray(colors0, dtype=np.int64)
    palette = tuple(sorted(set(colors0.tolist())))
    out = _run_tasks(_codes_chunk,
                     [(ci, size, colors0, qf, float(t), master_seed, palette)
                      for ci, _, size in _tasks(n_rep)],
                     n_jobs)
    codes = np.concatenate([c for c, _ in out])
    touched = np.concatenate([tch for _, tch in out])
    return StateCodes(window=(0, colors0.size - 1), palette=palette,
                      codes=codes, touched=touched)
