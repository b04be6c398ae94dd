"""Biased sorting dynamics: Mallows-distributed words, colored exclusion
engines, exact height laws, a determinantal long-time limit, and the
verification experiments tying them together.

The names re-exported here are the stable surface; underscore-prefixed
modules are internal.
"""

from .reports import ENGINE_VERSION as __version__  # noqa: F401

from .qcomb import (check_q, inversions, mallows_normalizer,
                    mallows_pmf_finite, q_binomial, q_pochhammer)
from .mallows import (ColorWordSampler, HeightPmf, MallowsPrefix,
                      cached_height_probs, height_pmf, height_pmf_multi,
                      mallows_subset, sample_color_word, sample_finite,
                      sample_infinite_prefix)
from .asep import (HOLE, ClockSchedule, ColoredConfig, ParticleConfig,
                   colored_from_word, height, influence_radius,
                   mallows_colored_step_init, project, rightmost,
                   simulate_multi, simulate_single, step_init, window_for)
from .batch import (AlphaSamples, HeightSamples, PositionSamples,
                    SubsetSamples, colored_alpha_samples,
                    mallows_particle_samples, particle_position_samples,
                    step_height_samples)
from .hermite_dpp import (DppSampler, KernelMatrix, XiDistribution,
                          closed_form_first_moment, dpp_sample,
                          fredholm_qlaplace, hermite_functions, kernel_dh,
                          kernel_matrix, q_laplace_of_pmf, weighted_trace,
                          xi_pmf)
from .stats import (EmpiricalPmf, chi_square_gof, chi_square_twosample,
                    independence_test, tv_distance, tv_noise_floor,
                    wilson_interval)
from .reports import (Check, ExperimentReport, check_ge, check_le,
                      read_jsonl, write_csv, write_jsonl)
from .experiments import (BudgetError, WindowError, calibrate,
                          diffusive_experiment, kpz_coupling_experiment,
                          kpz_lln_experiment, verify_color_preservation,
                          verify_many_point, verify_one_point)

__all__ = [name for name in dir() if not name.startswith("_")]
