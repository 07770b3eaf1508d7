"""Approximate discrete sampling, subsampled Metropolis-Hastings tests and a
Gibbs-step helper built on the bandit solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .control_variates import ControlVariate, residual_population
from .gumbel import FactorOracle, exact_argmax, perturb, sample_gumbel
from .lilucb import LilUcbConfig, lil_ucb
from .racing import RacingConfig, race
from .rewards import RewardPopulation, range_bounds

ALGORITHMS = ("racing-normal", "racing-ebs", "lil-ucb", "exact")


@dataclass
class SamplerSpec:
    """Which solver to run and how.

    ``variance`` applies to racing; populations with unequal sizes always
    race in ``independent`` mode. ``ranges`` are reward range bounds, needed
    by EBS and lil'UCB unless the population is materialized. ``lil_options``
    passes ``eps``, ``beta`` or ``lam`` through to :class:`LilUcbConfig`.
    """

    algorithm: str = "racing-normal"
    delta: float = 0.05
    variance: str = "pairwise"
    m1: int | None = None
    b_source: str = "solved"
    ranges: np.ndarray | float | None = None
    control_variate: ControlVariate | None = None
    lil_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.algorithm != "exact" and not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    def racing_config(self, population: RewardPopulation) -> RacingConfig:
        variance = self.variance if population.equal_sizes else "independent"
        bound = "ebs" if self.algorithm == "racing-ebs" else "normal"
        ranges = self.ranges
        if bound == "ebs" and ranges is None:
            ranges = range_bounds(population)
        return RacingConfig(delta=self.delta, bound=bound, variance=variance, m1=self.m1,
                            ranges=ranges, b_source=self.b_source)


@dataclass
class SampleOutcome:
    winner: int
    eps: np.ndarray
    counts: np.ndarray
    population: RewardPopulation

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def solve(population: RewardPopulation, spec: SamplerSpec, rng: np.random.Generator):
    """Best arm of ``population`` under ``spec``; returns ``(winner, counts)``."""
    if spec.control_variate is not None:
        population = residual_population(population, spec.control_variate)
    if spec.algorithm == "exact":
        return exact_argmax(population), population.sizes.copy()
    if spec.algorithm == "lil-ucb":
        cfg = LilUcbConfig(delta=spec.delta, ranges=spec.ranges, **spec.lil_options)
        res = lil_ucb(population, cfg, rng)
    else:
        res = race(population, spec.racing_config(population), rng, trace=False)
    return res.winner, res.counts


def approx_sample(oracle: FactorOracle, spec: SamplerSpec, rng: np.random.Generator, *,
                  eps=None, full_output: bool = False):
    """Draw one state from the target defined by ``oracle``.

    Gumbel noise and subsampling use separate child streams of ``rng``, so
    passing a fixed ``eps`` isolates the subsampling randomness.
    """
    gumbel_rng, sub_rng = rng.spawn(2)
    if eps is None:
        eps = sample_gumbel(gumbel_rng, oracle.arm_count)
    eps = np.asarray(eps, dtype=np.float64)
    population = perturb(oracle, eps)
    if oracle.arm_count == 1:
        winner, counts = 0, np.zeros(1, dtype=np.int64)
    else:
        winner, counts = solve(population, spec, sub_rng)
    if full_output:
        return SampleOutcome(winner, eps, counts, population)
    return winner


def mh_population(current, proposed, log_prior: Callable, log_proposal: Callable,
                  loglik: Callable, N: int, u: float) -> RewardPopulation:
    """Two-arm population whose better arm decides a Metropolis-Hastings test.

    Arm 0 keeps ``current`` and carries ``log u``; arm 1 moves to ``proposed``.
    ``log_proposal(a, b)`` is ``log q(a | b)`` and ``loglik(theta, indices)``
    returns per-datum log-likelihoods.
    """
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    base = np.array([
        math.log(u) + log_prior(current) + log_proposal(proposed, current),
        log_prior(proposed) + log_proposal(current, proposed),
    ])
    states = (current, proposed)
    oracle = FactorOracle([N, N], lambda arm, idx: loglik(states[arm], idx), base)
    return perturb(oracle, np.zeros(2))


def mh_accept(current, proposed, log_prior: Callable, log_proposal: Callable,
              loglik: Callable, N: int, u: float, spec: SamplerSpec,
              rng: np.random.Generator) -> bool:
    """Accept ``proposed`` when its arm wins; exact ties reject."""
    population = mh_population(current, proposed, log_prior, log_proposal, loglik, N, u)
    winner, _ = solve(population, spec, rng)
    return winner == 1


def gibbs_step(build_oracle: Callable[..., FactorOracle], state, spec: SamplerSpec,
               rng: np.random.Generator) -> int:
    """Redraw one component from the conditional that ``build_oracle(state)`` describes."""
    return approx_sample(build_oracle(state), spec, rng)


__all__ = ["ALGORITHMS", "SamplerSpec", "SampleOutcome", "solve", "approx_sample",
           "mh_population", "mh_accept", "gibbs_step"]
