import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mallows_asep.asep import (
    HOLE,
    ClockSchedule,
    ColoredConfig,
    ParticleConfig,
    ScheduleError,
    as_colored,
    colored_from_word,
    config_from_json,
    config_to_json,
    height,
    influence_radius,
    mallows_colored_step_init,
    project,
    replay_schedule,
    rightmost,
    simulate_multi,
    simulate_multi_on_schedule,
    simulate_single,
    simulate_single_on_schedule,
    step_init,
    truncation_bound,
    window_for,
)
from mallows_asep.stats import chi_square_gof
from scipy import stats as sps

from oracles import endpoint_pmf_exact

P_FLOOR = 1e-4


def rng_for(tag: int):
    return np.random.default_rng(55_100 + tag)


# ---------------------------------------------------------------------------
# configurations and schedules


def test_particle_config_validation():
    with pytest.raises(ValueError):
        ParticleConfig(0, 5, (3, 3))
    with pytest.raises(ValueError):
        ParticleConfig(0, 5, (4, 2))
    with pytest.raises(ValueError):
        ParticleConfig(0, 5, (6,))
    with pytest.raises(ValueError):
        ParticleConfig(5, 0, ())


def test_colored_config_validation():
    with pytest.raises(ValueError):
        ColoredConfig(0, 2, np.array([1, 2]))  # wrong length
    with pytest.raises(ValueError):
        ColoredConfig(0, 1, np.array([0, HOLE]))  # colors start at 1


def test_config_equality_ignores_touch_flag():
    a = ParticleConfig(0, 4, (1, 2), boundary_touched=False)
    b = ParticleConfig(0, 4, (1, 2), boundary_touched=True)
    assert a == b
    ca = ColoredConfig(0, 1, np.array([1, HOLE]), boundary_touched=True)
    cb = ColoredConfig(0, 1, np.array([1, HOLE]))
    assert ca == cb


def test_schedule_validation():
    good = dict(lo=0, hi=3, horizon=1.0)
    ClockSchedule(times=np.array([0.1, 0.5]), bond_sites=np.array([0, 2]),
                  coins=np.array([0.3, 0.7]), **good)
    with pytest.raises(ScheduleError):
        ClockSchedule(times=np.array([0.5, 0.5]), bond_sites=np.array([0, 1]),
                      coins=np.array([0.3, 0.7]), **good)
    with pytest.raises(ScheduleError):
        ClockSchedule(times=np.array([0.1, 0.5]), bond_sites=np.array([0, 3]),
                      coins=np.array([0.3, 0.7]), **good)
    with pytest.raises(ScheduleError):
        ClockSchedule(times=np.array([0.1]), bond_sites=np.array([0, 1]),
                      coins=np.array([0.3]), **good)
    with pytest.raises(ScheduleError):
        ClockSchedule(times=np.array([0.4, 1.2]), bond_sites=np.array([0, 1]),
                      coins=np.array([0.3, 0.7]), **good)


def test_schedule_replay_is_deterministic():
    a = replay_schedule(-4, 4, 2.0, master_seed=777, replica=3)
    b = replay_schedule(-4, 4, 2.0, master_seed=777, replica=3)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.bond_sites, b.bond_sites)
    assert np.array_equal(a.coins, b.coins)
    c = replay_schedule(-4, 4, 2.0, master_seed=777, replica=4)
    assert not np.array_equal(a.times, c.times)


def test_schedule_event_count_is_poisson():
    # total rate is one per bond
    rng = rng_for(0)
    nb, t, reps = 6, 0.7, 4000
    counts = Counter(len(ClockSchedule.sample(0, nb, t, rng)) for _ in range(reps))
    kmax = max(counts)
    probs = {k: sps.poisson.pmf(k, nb * t) for k in range(kmax)}
    probs[kmax] = float(sps.poisson.sf(kmax - 1, nb * t))
    res = chi_square_gof({k: counts.get(k, 0) for k in probs}, probs)
    assert res.pvalue > P_FLOOR


# ---------------------------------------------------------------------------
# initial data and observables


def test_step_init_heights():
    cfg = step_init(-6, 4)
    assert cfg.positions == tuple(range(-6, 1))
    for x in (-3, 0, 1, 0.5, -0.5):
        assert height(cfg, x) == max(0, 1 - math.ceil(x))


def test_colored_step_matches_word():
    cfg = colored_from_word(-3, 2, [5, 1, 7, 2])
    assert cfg.color_at(0) == 5
    assert cfg.color_at(-3) == 2
    assert cfg.color_at(1) == HOLE
    assert list(cfg.particle_sites()) == [-3, -2, -1, 0]


def test_mallows_colored_step_origin_law():
    # origin color is the first inserted value: geometric on 1, 2, ...
    q, reps = 0.5, 20_000
    rng = rng_for(1)
    counts = Counter(mallows_colored_step_init(-3, 2, q, rng).color_at(0)
                     for _ in range(reps))
    kmax = max(counts)
    probs = {k: q ** (k - 1) * (1 - q) for k in range(1, kmax)}
    probs[kmax] = q ** (kmax - 1)
    res = chi_square_gof({k: counts.get(k, 0) for k in probs}, probs)
    assert res.pvalue > P_FLOOR


def test_mallows_colored_step_colors_distinct():
    cfg = mallows_colored_step_init(-40, 5, 0.9, rng_for(2))
    vals = cfg.colors[cfg.colors != HOLE]
    assert len(set(vals.tolist())) == vals.size


def test_project_levels():
    cfg = colored_from_word(-3, 3, [2, 9, 1, 4])
    assert project(cfg, 0).positions == ()
    assert project(cfg, 1).positions == (-2,)
    assert project(cfg, 2).positions == (-2, 0)
    assert project(cfg, math.inf).positions == (-3, -2, -1, 0)
    with pytest.raises(ValueError):
        project(cfg, -1)


def test_height_and_rightmost_on_colored():
    cfg = colored_from_word(-2, 4, [3, 1, 2])
    assert rightmost(cfg) == 0
    assert height(cfg, -1.5) == 2
    assert height(cfg, 99) == 0
    assert rightmost(ParticleConfig(0, 3, ())) is None


def test_serialization_round_trip():
    colored = mallows_colored_step_init(-5, 3, 0.6, rng_for(3))
    assert config_from_json(config_to_json(colored)) == colored
    single = step_init(-4, 4)
    back = config_from_json(config_to_json(single))
    assert back == single and isinstance(back, ParticleConfig)


# ---------------------------------------------------------------------------
# engine laws against the exact finite-window generator


def _colored_counts_bond(colors0, q, t, reps, tag):
    rng = rng_for(tag)
    cfg = ColoredConfig(0, len(colors0) - 1, np.array(colors0))
    return Counter(
        tuple(simulate_multi(cfg, q, t, rng).colors.tolist())
        for _ in range(reps)
    )


def test_bond_engine_single_species_law():
    colors0 = (1, HOLE, 1, HOLE, HOLE)
    probs = endpoint_pmf_exact(colors0, q=0.4, t=0.8)
    counts = _colored_counts_bond(colors0, 0.4, 0.8, 4000, tag=4)
    res = chi_square_gof(dict(counts), probs)
    assert res.pvalue > P_FLOOR


def test_bond_engine_colored_law():
    colors0 = (1, 2, HOLE, HOLE)
    probs = endpoint_pmf_exact(colors0, q=0.3, t=0.9)
    counts = _colored_counts_bond(colors0, 0.3, 0.9, 4000, tag=5)
    res = chi_square_gof(dict(counts), probs)
    assert res.pvalue > P_FLOOR


def test_particle_engine_law():
    # same law as the bond engine, via the occupancy representation
    starts, lo, hi, q, t = (1, 2), 0, 4, 0.4, 0.8
    colors0 = tuple(1 if z in starts else HOLE for z in range(lo, hi + 1))
    probs = endpoint_pmf_exact(colors0, q=q, t=t)
    rng = rng_for(6)
    cfg = ParticleConfig(lo, hi, starts)
    counts = Counter()
    for _ in range(4000):
        out = simulate_single(cfg, q, t, rng, debug_checks=True)
        counts[tuple(1 if z in out.positions else HOLE
                     for z in range(lo, hi + 1))] += 1
    res = chi_square_gof(dict(counts), probs)
    assert res.pvalue > P_FLOOR


def test_particle_engine_pure_drift_at_q_zero():
    # lone particle, no left moves: displacement is Poisson(t)
    t, reps = 2.0, 4000
    rng = rng_for(7)
    cfg = ParticleConfig(-5, 60, (0,))
    counts = Counter(simulate_single(cfg, 0.0, t, rng).positions[0]
                     for _ in range(reps))
    kmax = max(counts)
    probs = {k: sps.poisson.pmf(k, t) for k in range(kmax)}
    probs[kmax] = float(sps.poisson.sf(kmax - 1, t))
    res = chi_square_gof({k: counts.get(k, 0) for k in probs}, probs)
    assert res.pvalue > P_FLOOR


# ---------------------------------------------------------------------------
# pathwise couplings on a shared schedule


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_projection_commutes_with_dynamics(seed):
    rng = np.random.default_rng(seed)
    lo, hi = -6, 5
    cfg = mallows_colored_step_init(lo, hi, 0.6, rng)
    sched = ClockSchedule.sample(lo, hi, 1.5, rng)
    evolved = simulate_multi_on_schedule(cfg, 0.6, sched)
    for k in (0, 1, 2, 5, math.inf):
        a = project(evolved, k)
        b = simulate_single_on_schedule(project(cfg, k), 0.6, sched)
        assert a == b


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_shared_schedule_preserves_height_order(seed):
    rng = np.random.default_rng(seed)
    lo, hi = -5, 6
    sites = list(range(lo, hi + 1))
    big = sorted(rng.choice(sites, size=6, replace=False).tolist())
    keep = rng.random(6) < 0.6
    small = [p for p, k in zip(big, keep) if k]
    A = ParticleConfig(lo, hi, tuple(small))
    B = ParticleConfig(lo, hi, tuple(big))
    sched = ClockSchedule.sample(lo, hi, 2.0, rng)
    outA = simulate_single_on_schedule(A, 0.4, sched)
    outB = simulate_single_on_schedule(B, 0.4, sched)
    for x in range(lo, hi + 2):
        assert height(outA, x) <= height(outB, x)


def test_conservation_under_debug_checks():
    rng = rng_for(8)
    cfg = mallows_colored_step_init(-8, 8, 0.7, rng)
    out = simulate_multi(cfg, 0.7, 3.0, rng, debug_checks=True)
    assert sorted(out.colors.tolist()) == sorted(cfg.colors.tolist())


def test_time_zero_is_identity():
    rng = rng_for(9)
    cfg = step_init(-4, 4)
    assert simulate_single(cfg, 0.5, 0.0, rng) == cfg
    col = as_colored(cfg)
    assert simulate_multi(col, 0.5, 0.0, rng) == col


# ---------------------------------------------------------------------------
# boundary awareness


def test_touch_flag_set_when_front_reaches_edge():
    # q = 0, lone particle one site from the right wall, long horizon
    rng = rng_for(10)
    cfg = ParticleConfig(-1, 3, (2,))
    out = simulate_single(cfg, 0.0, 50.0, rng)
    assert out.boundary_touched
    assert out.positions == (3,)
    colored = as_colored(ParticleConfig(-1, 3, (2,)))
    outc = simulate_multi(colored, 0.0, 50.0, rng)
    assert outc.boundary_touched


def test_touch_flag_clear_deep_in_bulk():
    rng = rng_for(11)
    cfg = ParticleConfig(-40, 40, (0,))
    out = simulate_single(cfg, 0.5, 1.0, rng)
    assert not out.boundary_touched


def test_touch_flag_set_when_starting_on_edge():
    rng = rng_for(12)
    cfg = ParticleConfig(0, 5, (0,))
    assert simulate_single(cfg, 0.5, 0.0, rng).boundary_touched


# ---------------------------------------------------------------------------
# window sizing


def test_truncation_bound_examples():
    assert truncation_bound(0.0, 3.2, 1e-8, 0.5) == 3 - 8
    assert truncation_bound(0.0, -2.0, 1e-8, 0.9) == -2 - 8


@pytest.mark.parametrize("t,q,tol", [(1.0, 0.0, 1e-6), (5.0, 0.5, 1e-8),
                                     (40.0, 0.9, 1e-10), (200.0, 0.5, 1e-8)])
def test_influence_radius_dominates_poisson_tail(t, q, tol):
    d = influence_radius(t, tol, q)
    assert float(sps.poisson.sf(d - 1, t)) <= tol
    assert d >= math.ceil((1.0 + q) * t + math.sqrt(2 * math.log(1 / tol) * (t + 1)) + 8)


def test_influence_radius_monotone():
    assert influence_radius(10, 1e-10, 0.5) >= influence_radius(10, 1e-6, 0.5)
    assert influence_radius(20, 1e-8, 0.5) >= influence_radius(10, 1e-8, 0.5)


def test_window_contains_origin_and_observables():
    lo, hi = window_for(3.0, [-2.5, 4.0], 1e-8, 0.5)
    d = influence_radius(3.0, 1e-8, 0.5)
    assert lo == -3 - d and hi == 4 + d


def test_bad_parameters_rejected():
    with pytest.raises(ValueError):
        influence_radius(-1.0, 1e-8, 0.5)
    with pytest.raises(ValueError):
        influence_radius(1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        step_init(2, 5)
    with pytest.raises(ValueError):
        simulate_single(ParticleConfig(0, 3, (1,)), 0.5, -1.0, rng_for(13))
