"""Approximate discrete sampling by best-arm identification over finite reward populations."""
from .bnormal import BNormalTable, b_simple, crossing_prob, interpolate_table, solve_b, walk_params
from .control_variates import ControlVariate, TaylorCV, residual_population, taylor_h, taylor_mean
from .gumbel import (FactorOracle, exact_argmax, exact_gumbel_sample, exact_sample_cdf, perturb,
                     sample_gumbel)
from .lilucb import LilUcbConfig, LilUcbResult, lil_ucb
from .racing import (KAPPA, RacingConfig, RacingResult, g_ebs, g_normal, g_normal_independent,
                     normalized_gap, predicted_sample_bound, race)
from .rewards import (ArmStats, ArrayPopulation, BatchSchedule, ExhaustedPopulationError,
                      FunctionPopulation, IndexSampler, RaggedPopulation, RewardPopulation,
                      UnavailableBoundError, build_schedule, draw_batch, load_population,
                      range_bound, range_bounds, save_population, update_stats)
from .sampler import SamplerSpec, approx_sample, gibbs_step, mh_accept

__version__ = "0.1.0"
