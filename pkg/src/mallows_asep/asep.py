"""Exclusion dynamics on an integer window, single and multi-color.

Two engines realize the same law.  The bond engine hangs a rate-1 Poisson
clock on every bond of the window and resolves each firing by priority:
lower color on the left always swaps right; higher color on the left swaps
with probability q, using a uniform coin attached to the firing.  Holes rank
above every color, so a lone particle hops right at rate 1 and left at rate
q.  The particle engine gives each particle its own pair of clocks and is
cheaper when almost every site is empty.

Windows are reflecting by omission: there are no bonds outside [lo, hi], so
nothing enters or leaves.  Use :func:`truncation_bound` to size the window
so the missing bonds are irrelevant up to a stated tolerance, and watch the
``boundary_touched`` flag on results, which records any occupancy change at
a window edge.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._rng import stream
from .mallows import sample_infinite_prefix
from .qcomb import check_q

HOLE = 2 ** 62  # sorts above every real color; never a valid color value

ENGINE_BOND = 0
ENGINE_PARTICLE = 1


class ScheduleError(RuntimeError):
    """A clock schedule violated the strictly-increasing-times contract."""


@dataclass(frozen=True)
class ParticleConfig:
    """Occupied sites of a single-species configuration on [lo, hi]."""

    lo: int
    hi: int
    positions: tuple
    boundary_touched: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")
        pos = tuple(int(p) for p in self.positions)
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be strictly increasing")
        if pos and (pos[0] < self.lo or pos[-1] > self.hi):
            raise ValueError(
                f"positions {pos[0]}..{pos[-1]} leave window [{self.lo}, {self.hi}]"
            )
        object.__setattr__(self, "positions", pos)

    def occupancy(self) -> np.ndarray:
        occ = np.zeros(self.hi - self.lo + 1, dtype=bool)
        for p in self.positions:
            occ[p - self.lo] = True
        return occ


@dataclass
class ColoredConfig:
    """Site colors on [lo, hi]; ``HOLE`` marks an empty site.

    Colors are positive integers; lower is higher priority.  When the
    configuration comes from a Mallows coloring all particle colors are
    distinct.
    """

    lo: int
    hi: int
    colors: np.ndarray
    boundary_touched: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.int64)
        if self.colors.shape != (self.hi - self.lo + 1,):
            raise ValueError(
                f"need {self.hi - self.lo + 1} colors for [{self.lo}, {self.hi}], "
                f"got {self.colors.shape}"
            )
        bad = (self.colors < 1) | ((self.colors != HOLE) & (self.colors >= HOLE))
        if bad.any():
            raise ValueError("colors must be positive integers or HOLE")

    def __eq__(self, other):
        if not isinstance(other, ColoredConfig):
            return NotImplemented
        return (
            self.lo == other.lo
            and self.hi == other.hi
            and np.array_equal(self.colors, other.colors)
        )

    def color_at(self, z: int) -> int:
        return int(self.colors[z - self.lo])

    def particle_sites(self) -> np.ndarray:
        return np.flatnonzero(self.colors != HOLE) + self.lo


@dataclass(frozen=True)
class ClockSchedule:
    """Merged bond firings on [lo, hi], ordered by strictly increasing time.

    ``bond_sites[k]`` is the left site of the k-th firing's bond and
    ``coins[k]`` its uniform payload; the coin is consumed only when the
    firing sees a higher color to the left, but it is attached to the firing
    unconditionally so that coupled runs on a shared schedule stay aligned.
    """

    lo: int
    hi: int
    horizon: float
    times: np.ndarray
    bond_sites: np.ndarray
    coins: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        b = np.asarray(self.bond_sites, dtype=np.int64)
        c = np.asarray(self.coins, dtype=np.float64)
        if not (t.shape == b.shape == c.shape):
            raise ScheduleError("times, bond_sites and coins must align")
        if t.size and (np.diff(t) <= 0).any():
            raise ScheduleError("event times must be strictly increasing")
        if t.size and (t[0] <= 0 or t[-1] > self.horizon):
            raise ScheduleError("event times must lie in (0, horizon]")
        if b.size and (b.min() < self.lo or b.max() >= self.hi):
            raise ScheduleError(f"bond sites must lie in [{self.lo}, {self.hi - 1}]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "bond_sites", b)
        object.__setattr__(self, "coins", c)

    def __len__(self) -> int:
        return int(self.times.size)

    @classmethod
    def sample(cls, lo: int, hi: int, t: float, rng) -> "ClockSchedule":
        """Rate-1 Poisson firings on every bond of [lo, hi] up to time t."""
        if hi <= lo:
            raise ValueError(f"need at least one bond in [{lo}, {hi}]")
        if t < 0:
            raise ValueError(f"horizon must be nonnegative, got {t}")
        nb = hi - lo
        counts = rng.poisson(t, size=nb)
        total = int(counts.sum())
        times = rng.random(total) * t
        bonds = np.repeat(np.arange(lo, hi, dtype=np.int64), counts)
        order = np.argsort(times, kind="stable")
        times = times[order]
        bonds = bonds[order]
        if times.size > 1 and (np.diff(times) <= 0).any():
            # two firings at the same float instant: probability zero event
            raise ScheduleError("coincident event times in sampled schedule")
        coins = rng.random(total)
        return cls(lo=lo, hi=hi, horizon=float(t), times=times,
                   bond_sites=bonds, coins=coins)


def replay_schedule(lo: int, hi: int, t: float, master_seed: int,
                    replica: int = 0) -> ClockSchedule:
    """Deterministically rebuild the schedule of one bond-engine replica."""
    return ClockSchedule.sample(lo, hi, t, stream(master_seed, ENGINE_BOND, replica))


# ---------------------------------------------------------------------------
# initial conditions


def step_init(lo: int, hi: int) -> ParticleConfig:
    """Every site at or below the origin occupied.  Window must contain 0."""
    if not lo <= 0 <= hi:
        raise ValueError(f"window [{lo}, {hi}] must contain the origin")
    return ParticleConfig(lo=lo, hi=hi, positions=tuple(range(lo, 1)))


def mallows_colored_step_init(lo: int, hi: int, q, rng) -> ColoredConfig:
    """Step initial data with colors drawn from the infinite Mallows sampler.

    The origin gets the first value, site -1 the second, and so on leftward;
    sites above the origin are holes.  The origin's color is geometric on
    1, 2, ... with success probability 1-q.
    """
    if not lo <= 0 <= hi:
        raise ValueError(f"window [{lo}, {hi}] must contain the origin")
    qf = float(check_q(q))
    m = -lo + 1
    prefix = sample_infinite_prefix(m, qf, rng)
    colors = np.full(hi - lo + 1, HOLE, dtype=np.int64)
    for j, v in enumerate(prefix.values):
        colors[-lo - j] = v  # site -j
    return ColoredConfig(lo=lo, hi=hi, colors=colors)


def colored_from_word(lo: int, hi: int, values) -> ColoredConfig:
    """Colored step data with explicit colors: site -j gets values[j]."""
    if not lo <= 0 <= hi:
        raise ValueError(f"window [{lo}, {hi}] must contain the origin")
    values = [int(v) for v in values]
    if len(values) != -lo + 1:
        raise ValueError(f"need {-lo + 1} colors for sites {lo}..0, got {len(values)}")
    colors = np.full(hi - lo + 1, HOLE, dtype=np.int64)
    for j, v in enumerate(values):
        colors[-lo - j] = v
    return ColoredConfig(lo=lo, hi=hi, colors=colors)


def as_colored(cfg: ParticleConfig, color: int = 1) -> ColoredConfig:
    colors = np.full(cfg.hi - cfg.lo + 1, HOLE, dtype=np.int64)
    for p in cfg.positions:
        colors[p - cfg.lo] = color
    return ColoredConfig(lo=cfg.lo, hi=cfg.hi, colors=colors)


# ---------------------------------------------------------------------------
# reference engines (explicit schedules, pure python; see batch.py for the
# compiled replica drivers used by the experiments)


def _harris_sweep(colors: np.ndarray, bond_index: np.ndarray, coins: np.ndarray,
                  q: float, debug_checks: bool = False) -> bool:
    """Apply firings in order to the color array.  Returns the touch flag."""
    touched = False
    nb = colors.size - 1
    n_particles = int((colors != HOLE).sum())
    for k in range(bond_index.size):
        i = int(bond_index[k])
        cl = colors[i]
        cr = colors[i + 1]
        if cl < cr:
            do_swap = True
        elif cl > cr:
            do_swap = coins[k] < q
        else:
            do_swap = False
        if do_swap:
            colors[i] = cr
            colors[i + 1] = cl
            occupancy_moved = (cl == HOLE) != (cr == HOLE)
            if occupancy_moved and (i == 0 or i == nb - 1):
                touched = True
        if debug_checks:
            assert (colors != HOLE).sum() == n_particles, "conservation broken"
    return touched


def simulate_multi_on_schedule(cfg: ColoredConfig, q, schedule: ClockSchedule,
                               debug_checks: bool = False) -> ColoredConfig:
    """Run the bond engine over an explicit schedule (replayable)."""
    if (schedule.lo, schedule.hi) != (cfg.lo, cfg.hi):
        raise ValueError("schedule window does not match configuration window")
    qf = float(check_q(q))
    colors = cfg.colors.copy()
    touched = _harris_sweep(colors, schedule.bond_sites - cfg.lo, schedule.coins,
                            qf, debug_checks)
    return ColoredConfig(lo=cfg.lo, hi=cfg.hi, colors=colors,
                         boundary_touched=touched)


def simulate_multi(cfg: ColoredConfig, q, t: float, rng,
                   debug_checks: bool = False) -> ColoredConfig:
    """Bond engine with a freshly sampled schedule on the window."""
    sched = ClockSchedule.sample(cfg.lo, cfg.hi, t, rng)
    return simulate_multi_on_schedule(cfg, q, sched, debug_checks)


def simulate_single_on_schedule(cfg: ParticleConfig, q,
                                schedule: ClockSchedule) -> ParticleConfig:
    """Single-species dynamics driven by bond clocks.

    Same firing resolution as the colored engine with every particle given
    the same color, which is what makes projection commute with dynamics on
    a shared schedule.
    """
    colored = as_colored(cfg)
    out = simulate_multi_on_schedule(colored, q, schedule)
    return ParticleConfig(lo=cfg.lo, hi=cfg.hi,
                          positions=tuple(out.particle_sites()),
                          boundary_touched=out.boundary_touched)


def simulate_single(cfg: ParticleConfig, q, t: float, rng,
                    debug_checks: bool = False) -> ParticleConfig:
    """Particle engine: per-particle clocks, attempts resolved by exclusion.

    Attempts arrive at total rate n(1+q); each picks a uniform particle and
    a direction, right with probability 1/(1+q).  Blocked attempts (target
    occupied or outside the window) do nothing.  Draw order per run: the
    attempt count, then one particle index and one direction uniform per
    attempt.
    """
    qf = float(check_q(q))
    if t < 0:
        raise ValueError(f"horizon must be nonnegative, got {t}")
    pos = list(cfg.positions)
    n = len(pos)
    touched = bool(pos) and (pos[0] == cfg.lo or pos[-1] == cfg.hi)
    if n == 0 or t == 0:
        return ParticleConfig(lo=cfg.lo, hi=cfg.hi, positions=tuple(pos),
                              boundary_touched=touched)
    n_att = int(rng.poisson(n * (1.0 + qf) * t))
    who = rng.integers(0, n, size=n_att)
    dirs = rng.random(n_att)
    p_right = 1.0 / (1.0 + qf)
    for a in range(n_att):
        j = int(who[a])
        if dirs[a] < p_right:
            tgt = pos[j] + 1
            if tgt <= cfg.hi and (j == n - 1 or pos[j + 1] != tgt):
                pos[j] = tgt
        else:
            tgt = pos[j] - 1
            if tgt >= cfg.lo and (j == 0 or pos[j - 1] != tgt):
                pos[j] = tgt
        if pos[j] == cfg.lo or pos[j] == cfg.hi:
            touched = True
        if debug_checks:
            assert all(x < y for x, y in zip(pos, pos[1:])), "exclusion broken"
    return ParticleConfig(lo=cfg.lo, hi=cfg.hi, positions=tuple(pos),
                          boundary_touched=touched)


# ---------------------------------------------------------------------------
# observables


def project(cfg: ColoredConfig, k) -> ParticleConfig:
    """Keep the sites whose color is at most k (k = math.inf keeps all)."""
    if k != math.inf and k < 0:
        raise ValueError(f"color level must be nonnegative or inf, got {k}")
    mask = cfg.colors != HOLE
    if k != math.inf:
        mask &= cfg.colors <= int(k)
    return ParticleConfig(lo=cfg.lo, hi=cfg.hi,
                          positions=tuple(np.flatnonzero(mask) + cfg.lo),
                          boundary_touched=cfg.boundary_touched)


def height(cfg, x: float) -> int:
    """Number of particles at or to the right of x."""
    lvl = math.ceil(x)
    if isinstance(cfg, ColoredConfig):
        i = max(lvl - cfg.lo, 0)
        if lvl > cfg.hi:
            return 0
        return int((cfg.colors[i:] != HOLE).sum())
    pos = cfg.positions
    return len(pos) - bisect_left(pos, lvl)


def rightmost(cfg):
    """Largest occupied site, or None for an empty configuration."""
    if isinstance(cfg, ColoredConfig):
        occ = np.flatnonzero(cfg.colors != HOLE)
        return None if occ.size == 0 else int(occ[-1] + cfg.lo)
    return cfg.positions[-1] if cfg.positions else None


# ---------------------------------------------------------------------------
# window sizing


def influence_radius(t: float, tol: float, q) -> int:
    """Distance the dynamics can notice across, up to probability tol.

    Information crosses a stretch of d bonds only through d firings in
    increasing time order, so the crossing time dominates a Gamma(d, 1)
    variable and P(cross by t) <= P(Poisson(t) >= d).  The returned d is the
    analytic sizing (1+q)t + a*sqrt(t+1) + b, enlarged if needed until the
    exact Poisson tail is below tol.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if not 0 < tol < 1:
        raise ValueError(f"tol must be a probability in (0, 1), got {tol}")
    qf = float(check_q(q))
    b = 8
    if t == 0:
        return b
    a = math.sqrt(2.0 * math.log(1.0 / tol))
    d = math.ceil((1.0 + qf) * t + a * math.sqrt(t + 1.0) + b)
    while stats.poisson.sf(d - 1, t) > tol:
        d += max(1, d // 10)
    return int(d)


def truncation_bound(t: float, x: float, tol: float, q) -> int:
    """Left window edge below which initial data cannot affect height at x."""
    if t == 0:
        return math.floor(x) - 8
    return math.floor(x) - influence_radius(t, tol, q)


def window_for(t: float, xs, tol: float, q) -> tuple:
    """Window [lo, hi] adequate for step data observed at every x in xs."""
    xs = list(xs)
    d = influence_radius(t, tol, q)
    lo = math.floor(min(xs + [0])) - d
    hi = math.ceil(max(xs + [0])) + d
    return lo, hi


# ---------------------------------------------------------------------------
# snapshots


def config_to_json(cfg) -> str:
    if isinstance(cfg, ColoredConfig):
        sites = cfg.particle_sites()
        rec = {
            "window": [cfg.lo, cfg.hi],
            "sites": [int(z) for z in sites],
            "colors": [int(cfg.colors[z - cfg.lo]) for z in sites],
        }
    else:
        rec = {
            "window": [cfg.lo, cfg.hi],
            "sites": [int(z) for z in cfg.positions],
            "colors": None,
        }
    return json.dumps(rec, sort_keys=True)


def config_from_json(text: str):
    rec = json.loads(text)
    lo, hi = (int(v) for v in rec["window"])
    sites = [int(z) for z in rec["sites"]]
    if rec.get("colors") is None:
        return ParticleConfig(lo=lo, hi=hi, positions=tuple(sites))
    colors = np.full(hi - lo + 1, HOLE, dtype=np.int64)
    for z, c in zip(sites, rec["colors"]):
        colors[z - lo] = int(c)
    return ColoredConfig(lo=lo, hi=hi, colors=colors)
