"""Full-stack acceptance runs at the advertised tolerances and budgets.

One test per criterion.  Each test registers its verdict with the shared
summary table before asserting, so the terminal report always lists every
criterion that ran, including honest failures.  Master seeds are frozen;
every statistical run here is deterministic and was verified once at
freeze time to sit inside its tolerance with margin (or, where flagged,
to sit outside it for a documented reason).
"""

import os
import time
from fractions import Fraction

import numpy as np

from mallows_asep.asep import HOLE
from mallows_asep.batch import (encode_states, endpoint_state_codes,
                                particle_position_samples)
from mallows_asep.experiments import (diffusive_experiment,
                                      kpz_coupling_experiment,
                                      kpz_lln_experiment,
                                      verify_color_preservation,
                                      verify_one_point)
from mallows_asep.hermite_dpp import (closed_form_first_moment,
                                      fredholm_qlaplace, weighted_trace)
from mallows_asep.mallows import height_pmf, sample_finite
from mallows_asep.stats import chi_square_gof
from mallows_asep._rng import stream

from conftest import record_criterion
from oracles import endpoint_pmf_exact, keep_pattern_pmf, \
    mallows_pmf_exhaustive

N_JOBS = min(4, os.cpu_count() or 1)


def test_criterion_01_exact_height_law():
    t0 = time.monotonic()
    ok = True
    for q in (Fraction(0), Fraction(3, 10), Fraction(7, 10)):
        for K in range(0, 7):
            for L in range(0, 7):
                got = height_pmf(K, L, q).as_dict()
                agg = {}
                for pattern, w in keep_pattern_pmf(K, L, q).items():
                    s = sum(pattern)
                    agg[s] = agg.get(s, Fraction(0)) + w
                ok = ok and got == agg
                ok = ok and got == height_pmf(L, K, q).as_dict()
    elapsed = time.monotonic() - t0
    passed = ok and elapsed < 10.0
    record_criterion(1, "low-count law equals word enumeration exactly, "
                     "K,L <= 6, symmetric in K,L", passed,
                     f"rational arithmetic, {elapsed:.1f}s")
    assert ok
    assert elapsed < 10.0


def test_criterion_02_finite_sampler_gof():
    t0 = time.monotonic()
    rng = stream(123, 77)
    counts = {}
    for _ in range(10 ** 6):
        w = sample_finite(4, 0.5, rng)
        counts[w] = counts.get(w, 0) + 1
    probs = {w: float(p)
             for w, p in mallows_pmf_exhaustive(4, Fraction(1, 2)).items()}
    res = chi_square_gof(counts, probs)
    elapsed = time.monotonic() - t0
    passed = res.pvalue > 1e-3 and elapsed < 30.0
    record_criterion(2, "finite sampler matches the inversion-weighted law, "
                     "n=4, q=0.5, 1e6 draws", passed,
                     f"p={res.pvalue:.3f}, {elapsed:.0f}s")
    assert res.pvalue > 1e-3
    assert elapsed < 30.0


def test_criterion_03_jump_engine_law():
    # Window laws sit near the 1e6-replica noise floor (~7e-4 expected TV
    # against a 1e-3 budget), so the master seed is frozen at a verified
    # draw; a systematic engine error still clears the floor and fails.
    t0 = time.monotonic()
    runs = [((1, 1, HOLE, HOLE, HOLE), 0.0),
            ((1, 1, HOLE, HOLE, HOLE), 0.5),
            ((1, 1, 1, HOLE, HOLE), 0.0),
            ((1, 1, 1, HOLE, HOLE), 0.5)]
    tvs = []
    for cfg, q in runs:
        sc = endpoint_state_codes(cfg, 0.5, q, 10 ** 6, 2, n_jobs=N_JOBS)
        code_p = {}
        for state, p in endpoint_pmf_exact(cfg, q, 0.5).items():
            c = encode_states(np.array([state], dtype=np.int64), sc.palette)
            code_p[int(c[0])] = p
        vals, cnts = np.unique(sc.codes, return_counts=True)
        emp = dict(zip(vals.tolist(), (cnts / 10 ** 6).tolist()))
        support = set(code_p) | set(emp)
        tvs.append(0.5 * sum(abs(emp.get(c, 0.0) - code_p.get(c, 0.0))
                             for c in support))
    elapsed = time.monotonic() - t0
    ok = all(tv <= 1e-3 for tv in tvs)
    passed = ok and elapsed < 300.0
    record_criterion(3, "two- and three-particle window laws match the "
                     "generator exponential, TV <= 1e-3 at 1e6 replicas",
                     passed,
                     "tv=" + "/".join(f"{tv:.1e}" for tv in tvs)
                     + f", {elapsed:.0f}s")
    assert ok, tvs
    assert elapsed < 300.0


def test_criterion_04_color_invariance():
    t0 = time.monotonic()
    report = verify_color_preservation(3, 3, 0.5, 2.0, 100000, 104,
                                       n_jobs=N_JOBS)
    elapsed = time.monotonic() - t0
    passed = report.passed and elapsed < 300.0
    detail = ", ".join(f"{c.name}={c.value:.3f}" for c in report.checks)
    record_criterion(4, "low-color count keeps its exact law under colored "
                     "dynamics and is independent of the front", passed,
                     detail + f", {elapsed:.0f}s")
    assert report.passed, report.summary_lines()
    assert elapsed < 300.0


def test_criterion_05_height_mixture_identity():
    t0 = time.monotonic()
    report = verify_one_point(2, 0.5, 20.0, 10, 100000, 105, n_jobs=N_JOBS)
    elapsed = time.monotonic() - t0
    tv = report.statistics["tv"]
    passed = report.passed and tv <= 0.01 and elapsed < 600.0
    record_criterion(5, "colored height law equals the length-mixture of "
                     "exact low-count laws, K=2, t=20, x=10", passed,
                     f"tv={tv:.4f}, {elapsed:.0f}s")
    assert report.passed, report.summary_lines()
    assert tv <= 0.01
    assert elapsed < 600.0


def test_criterion_06_weighted_trace_closed_form():
    t0 = time.monotonic()
    worst = 0.0
    for r in (-1.0, 0.0, 1.0):
        for q in (0.2, 0.5):
            worst = max(worst, abs(weighted_trace(r, q)
                                   - closed_form_first_moment(r, q)))
    limit_gap = max(abs(weighted_trace(-40.0, q) - 1.0 / (1.0 - q))
                    for q in (0.2, 0.5))
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-8 and limit_gap <= 1e-8
    passed = ok and elapsed < 60.0
    record_criterion(6, "weighted spectral trace equals the closed-form "
                     "first moment; far-left limit is 1/(1-q)", passed,
                     f"grid gap={worst:.1e}, limit gap={limit_gap:.1e}, "
                     f"{elapsed:.0f}s")
    assert worst <= 1e-8
    assert limit_gap <= 1e-8
    assert elapsed < 60.0


def test_criterion_07_fredholm_slope():
    t0 = time.monotonic()
    z = 1e-6
    slope = (1.0 - fredholm_qlaplace(0.0, 0.5, z)) / z
    gap = abs(slope - weighted_trace(0.0, 0.5))
    elapsed = time.monotonic() - t0
    passed = gap <= 1e-5 and elapsed < 60.0
    record_criterion(7, "determinant slope at the origin matches the "
                     "weighted trace", passed,
                     f"gap={gap:.1e}, {elapsed:.0f}s")
    assert gap <= 1e-5
    assert elapsed < 60.0


def test_criterion_08_single_particle_diffusion():
    t0 = time.monotonic()
    ps = particle_position_samples((0,), 400.0, 0.5, 100000, 20260808,
                                   n_jobs=N_JOBS)
    disp = ps.finals[:, 0].astype(float)
    var_t = disp.var(ddof=1) / 400.0
    mean_t = disp.mean() / 400.0
    elapsed = time.monotonic() - t0
    ok = abs(var_t - 1.5) <= 0.03 and abs(mean_t - 0.5) <= 0.01
    passed = ok and elapsed < 120.0
    record_criterion(8, "lone-particle displacement at t=400: variance rate "
                     "1+q and drift rate 1-q, each within 2%", passed,
                     f"var/t={var_t:.4f}, mean/t={mean_t:.4f}, "
                     f"{elapsed:.0f}s")
    assert abs(var_t - 1.5) <= 0.03, var_t
    assert abs(mean_t - 0.5) <= 0.01, mean_t
    assert elapsed < 120.0


def test_criterion_09_deficit_lln():
    t0 = time.monotonic()
    report = kpz_lln_experiment((0.2, 0.1, 0.05), 0.0, 0.0, 1000, 109)
    elapsed = time.monotonic() - t0
    devs = [row["deviation"] for row in report.statistics["per_eps"]]
    passed = report.passed and elapsed < 600.0
    record_criterion(9, "scaled deficit mean within 0.05 of ln 2 at the "
                     "smallest epsilon, tightening along the ladder", passed,
                     "dev=" + "/".join(f"{d:.3f}" for d in devs)
                     + f", {elapsed:.0f}s")
    assert report.passed, report.summary_lines()
    assert elapsed < 600.0


def test_criterion_10_finite_time_routes():
    # Finite-t stand-in for the long-time front law: the spectral route and
    # the direct simulation route must agree on the same functional.
    t0 = time.monotonic()
    report = diffusive_experiment(2, 0.5, 200.0, (0.0,), 100000, 110,
                                  n_jobs=N_JOBS)
    elapsed = time.monotonic() - t0
    pr = report.statistics["per_r"]["r=0"]
    passed = (report.passed and "finite-t" in report.labels
              and pr["tv_routes"] <= 0.05)
    record_criterion(10, "two independent routes to the front functional "
                     "agree at t=200 (finite-t label)", passed,
                     f"tv_routes={pr['tv_routes']:.4f}, "
                     f"tv_coupling={pr['tv_coupling']:.4f}, {elapsed:.0f}s")
    assert "finite-t" in report.labels
    assert report.passed, report.summary_lines()
    assert pr["tv_routes"] <= 0.05


def test_criterion_11_per_replica_coupling():
    # Known deviation, kept red on purpose: at eps=0.25 the per-replica
    # discrepancy median sits at -0.175 (confirmed at 20x the replica
    # budget), outside the +/-0.15 band; the offset shrinks as eps drops.
    # Seeds whose 1000-replica median lands inside the band exist (2 of 8
    # tried) but are noise; the frozen seed realizes the distributional
    # median.  The flipped-sign median is a diagnostic only.
    t0 = time.monotonic()
    report = kpz_coupling_experiment(0.25, 0.0, 1.0, 1000, 222,
                                     n_jobs=N_JOBS)
    elapsed = time.monotonic() - t0
    med = report.statistics["discrepancy_median"]
    flip = report.statistics["discrepancy_median_flipped_sign"]
    passed = report.passed and abs(med) <= 0.15
    record_criterion(11, "per-replica coupling discrepancy median within "
                     "+/-0.15 at eps=0.25", passed,
                     f"median={med:.4f}, flipped-sign diag={flip:.4f}, "
                     f"{elapsed:.0f}s")
    assert abs(med) <= 0.15, (med, flip)
    assert report.passed, report.summary_lines()
