"""Synthetic benchmarks: error-rate sweeps, the B table and a toy Gibbs chain.

Every trial draws from its own stream ``SeedSequence(seed, spawn_key=...)``,
so results do not depend on execution order or worker count.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import softmax
from scipy.stats import binomtest

from .bnormal import TABLE_DELTAS, TABLE_PROPORTIONS, BNormalTable
from .gumbel import FactorOracle, exact_argmax
from .rewards import ArrayPopulation, range_bounds
from .sampler import SamplerSpec, approx_sample

DISTRIBUTIONS = ("normal", "uniform", "lognormal")
DEFAULT_DELTAS = (0.001, 0.003, 0.01, 0.03, 0.1)
SWEEP_COLUMNS = ("algorithm", "distribution", "sigma", "delta", "trials", "errors", "error_rate",
                 "wilson_lo", "wilson_hi", "mean_proportion_sampled")


def default_target(D: int) -> np.ndarray:
    """Softmax of logits evenly spaced on [0, 2]."""
    return softmax(np.linspace(0.0, 2.0, D))


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class SyntheticSpec:
    D: int = 10
    N: int = 10_000
    dist: str = "normal"
    sigma: float = 0.1
    target: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.dist not in DISTRIBUTIONS:
            raise ValueError(f"dist must be one of {DISTRIBUTIONS}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.D < 1 or self.N < 2:
            raise ValueError("need D >= 1 and N >= 2")
        if self.target is None:
            self.target = default_target(self.D)
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.target.shape != (self.D,) or np.any(self.target <= 0):
            raise ValueError("target must hold D positive probabilities")
        if abs(self.target.sum() - 1.0) > 1e-9:
            raise ValueError("target probabilities must sum to 1")


def raw_draws(dist: str, rng: np.random.Generator, shape) -> np.ndarray:
    if dist == "normal":
        return rng.standard_normal(shape)
    if dist == "uniform":
        return rng.random(shape)
    return rng.lognormal(0.0, 2.0, shape)


def synth_gen(spec: SyntheticSpec, rng: np.random.Generator | None = None):
    """Population with per-arm std ``sigma`` and mean ``log p(i) / N``.

    Returns ``(population, p)``. Perturbing it with fresh Gumbel noise and
    taking the best arm samples ``p``.
    """
    rng = stream(spec.seed) if rng is None else rng
    raw = raw_draws(spec.dist, rng, (spec.D, spec.N))
    centered = raw - raw.mean(axis=1, keepdims=True)
    values = centered * (spec.sigma / centered.std(axis=1, keepdims=True))
    values += (np.log(spec.target) / spec.N)[:, None]
    return ArrayPopulation(values), spec.target


@dataclass
class SweepRow:
    algorithm: str
    distribution: str
    sigma: float
    delta: float
    trials: int
    errors: int
    error_rate: float
    wilson_lo: float
    wilson_hi: float
    mean_proportion_sampled: float

    def cells(self) -> list[str]:
        return [self.algorithm, self.distribution, f"{self.sigma:g}", f"{self.delta:g}",
                str(self.trials), str(self.errors), f"{self.error_rate:.6g}",
                f"{self.wilson_lo:.6g}", f"{self.wilson_hi:.6g}",
                f"{self.mean_proportion_sampled:.6g}"]


def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class SweepCell:
    index: int
    algorithm: str
    dist: str
    sigma: float
    delta: float
    trials: int
    D: int
    N: int
    seed: int
    m1: int | None = None
    variance: str = "pairwise"
    target: list | None = field(default=None, repr=False)


def run_cell(cell: SweepCell) -> SweepRow:
    """All trials of one (algorithm, distribution, sigma, delta) setting."""
    dist_i = DISTRIBUTIONS.index(cell.dist)
    spec = SyntheticSpec(cell.D, cell.N, cell.dist, cell.sigma, cell.target, cell.seed)
    # raw draws depend only on the distribution; sigma rescales them
    population, _ = synth_gen(spec, stream(cell.seed, 0, dist_i))
    oracle = FactorOracle.from_arrays(population.values)
    ranges = range_bounds(population)
    sampler = SamplerSpec(cell.algorithm, delta=cell.delta, variance=cell.variance, m1=cell.m1,
                          ranges=ranges)
    errors = 0
    drawn = 0
    for trial in range(cell.trials):
        out = approx_sample(oracle, sampler, stream(cell.seed, 1, cell.index, trial),
                            full_output=True)
        errors += out.winner != exact_argmax(out.population)
        drawn += out.total
    lo, hi = wilson_interval(errors, cell.trials)
    return SweepRow(cell.algorithm, cell.dist, cell.sigma, cell.delta, cell.trials, errors,
                    errors / cell.trials, lo, hi, drawn / (cell.trials * cell.D * cell.N))


def sweep_cells(algorithms, dists, sigmas, deltas, trials, *, D=10, N=10_000, seed=0,
                m1=None, variance="pairwise", target=None) -> list[SweepCell]:
    grid = itertools.product(algorithms, dists, sigmas, deltas)
    tgt = None if target is None else list(map(float, target))
    return [SweepCell(k, a, d, float(s), float(dl), trials, D, N, seed, m1, variance, tgt)
            for k, (a, d, s, dl) in enumerate(grid)]


def run_error_sweep(algorithms=("racing-normal",), dists=("normal",), sigmas=(0.1,),
                    deltas=DEFAULT_DELTAS, trials=2000, *, workers: int = 1, **kwargs) -> list[SweepRow]:
    """Misidentification rates over the full settings grid, in grid order."""
    cells = sweep_cells(algorithms, dists, sigmas, deltas, trials, **kwargs)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(run_cell, cells))
    return [run_cell(c) for c in cells]


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def emit_bnormal_table(deltas=TABLE_DELTAS, proportions=TABLE_PROPORTIONS) -> str:
    """The B table as CSV text: one row per delta, one column per first proportion."""
    buf = io.StringIO()
    BNormalTable.generate(deltas, proportions).to_csv(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Toy Gibbs chain
# ---------------------------------------------------------------------------


@dataclass
class GibbsDemoConfig:
    """Discrete location ``q`` on a grid, Gaussian data, flat prior.

    ``spread`` is the grid spacing in units of the posterior standard
    deviation, so larger values give a more concentrated posterior.
    """

    states: int = 10
    N: int = 1000
    draws: int = 100_000
    delta: float = 0.05
    algorithm: str = "racing-normal"
    spread: float = 1.0
    seed: int = 0


def gibbs_model(config: GibbsDemoConfig):
    """Return ``(oracle, posterior)`` for the toy model."""
    rng = stream(config.seed, 2)
    data = rng.normal(0.0, 1.0, config.N)
    step = config.spread / np.sqrt(config.N)
    grid = data.mean() + step * (np.arange(config.states) - (config.states - 1) / 2)
    loglik = -0.5 * (data[None, :] - grid[:, None]) ** 2
    oracle = FactorOracle.from_arrays(loglik)
    return oracle, softmax(loglik.sum(axis=1))


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def gibbs_demo(config: GibbsDemoConfig) -> dict:
    """Run an exact and a subsampled chain on shared Gumbel streams and compare."""
    oracle, posterior = gibbs_model(config)
    exact_spec = SamplerSpec("exact")
    sub_spec = SamplerSpec(config.algorithm, delta=config.delta,
                           ranges=range_bounds(ArrayPopulation(oracle.dense)))
    D, N = config.states, config.N
    exact_counts = np.zeros(D, dtype=np.int64)
    sub_counts = np.zeros(D, dtype=np.int64)
    disagreements = 0
    drawn = 0
    # the conditional of the single component ignores the previous state
    for k in range(config.draws):
        x_exact = approx_sample(oracle, exact_spec, stream(config.seed, 3, k))
        out = approx_sample(oracle, sub_spec, stream(config.seed, 3, k), full_output=True)
        exact_counts[x_exact] += 1
        sub_counts[out.winner] += 1
        disagreements += out.winner != x_exact
        drawn += out.total
    n = config.draws
    return {
        "config": asdict(config),
        "posterior": posterior.tolist(),
        "exact": {"tv": total_variation(exact_counts / n, posterior), "rewards_ratio": 1.0},
        "subsampled": {
            "tv": total_variation(sub_counts / n, posterior),
            "racing_error_rate": disagreements / n,
            "rewards_ratio": drawn / (n * D * N),
        },
    }


def gibbs_report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
