"""Racing for best-arm identification over finite reward populations.

Each round draws a batch of fresh indices (shared across arms, or per arm in
``independent`` mode), updates the running means, and eliminates every arm
whose gap to the leader exceeds an uncertainty bound ``G``. Bounds vanish once
a population is exhausted, so the race always terminates with at most
``sum(N_i)`` rewards drawn.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .bnormal import b_simple, default_table, interpolate_table, solve_b
from .rewards import (
    BatchSchedule,
    IndexSampler,
    RewardPopulation,
    build_schedule,
    merge_moments,
)

KAPPA = 7.0 / 3.0 + 3.0 / math.sqrt(2.0)

BOUNDS = ("normal", "ebs")
VARIANCE_MODES = ("marginal", "pairwise", "independent")
B_SOURCES = ("solved", "table", "simple")


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Uncertainty bounds
# ---------------------------------------------------------------------------


def serfling_rho(T, N):
    """Finite-population factor of the empirical Bernstein-Serfling bound."""
    T = np.asarray(T, dtype=np.float64)
    return np.where(T <= N / 2, 1.0 - (T - 1.0) / N, (1.0 - T / N) * (1.0 + 1.0 / T))


def b_ebs(delta, T, sigma, C, N):
    """Empirical Bernstein-Serfling deviation at confidence ``1 - delta``."""
    log_term = math.log(5.0 / delta)
    return (np.asarray(sigma) * np.sqrt(2.0 * serfling_rho(T, N) * log_term / T)
            + KAPPA * np.asarray(C) * log_term / T)


def g_ebs(delta, T, sigma, C, N, t_star):
    """EBS racing bound: ``b_ebs`` at ``delta / (t* - 1)``, forced to 0 at ``T = N``."""
    T = int(T)
    if T < 1 or T > N:
        raise ValueError(f"sample count T={T} outside 1..{N}")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if T == N:
        return np.zeros(np.broadcast(np.asarray(sigma), np.asarray(C)).shape)[()]
    return b_ebs(delta / (t_star - 1), T, sigma, C, N)


def _fpc(T, N):
    """``1 - (T - 1) / (N - 1)``, with the single-element population treated as exhausted."""
    T = np.asarray(T, dtype=np.float64)
    N = np.asarray(N, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(N > 1, 1.0 - (T - 1.0) / np.where(N > 1, N - 1.0, 1.0), 0.0)
    return np.clip(out, 0.0, None)


def g_normal(delta, T, sigma, N, B):
    """Normal racing bound ``sigma / sqrt(T) * sqrt(1 - (T-1)/(N-1)) * B``.

    ``delta`` only enters through ``B``; it is accepted for a uniform signature.
    """
    if np.any(np.asarray(T) < 1) or np.any(np.asarray(T) > np.asarray(N)):
        raise ValueError("sample counts must satisfy 1 <= T <= N")
    return np.asarray(sigma) / np.sqrt(T) * np.sqrt(_fpc(T, N)) * B


def g_normal_independent(delta, T_i, T_j, sigma_i, sigma_j, N_i, N_j, B):
    """Normal bound on the gap of two independently sampled arms."""
    var = (np.asarray(sigma_i) ** 2 / T_i * _fpc(T_i, N_i)
           + np.asarray(sigma_j) ** 2 / T_j * _fpc(T_j, N_j))
    return np.sqrt(var) * B


# ---------------------------------------------------------------------------
# Complexity prediction
# ---------------------------------------------------------------------------


def doubling_ceil(n: float, m: int, N: int) -> int:
    """Smallest doubling-schedule size ``m * 2^k`` (k >= 0) that reaches ``n``, capped at ``N``."""
    if n <= m:
        return min(m, N)
    return int(min(m * 2 ** math.ceil(math.log2(n / m)), N))


def predicted_sample_bound(gap: float, N: int, D: int, m1: int, delta: float,
                           B: float | Callable[[float], float], mode: str = "pairwise") -> int:
    """High-probability cap on the rewards drawn by Normal racing.

    ``B`` is either the constant for ``delta / D'`` or a callable mapping
    that level to the constant (``D' = D - 1`` in pairwise mode, else ``D``).
    """
    if gap < 0:
        raise ValueError("gap must be non-negative")
    d_prime = D - 1 if mode == "pairwise" else D
    b = B(delta / d_prime) if callable(B) else float(B)
    if gap == 0.0:
        return D * N
    if math.isinf(gap) or b == 0.0:
        return D * min(m1, N)
    target = N / ((N - 1) * gap * gap / (4.0 * b * b) + 1.0)
    return D * doubling_ceil(target, m1, N)


def normalized_gap(population: RewardPopulation, mode: str = "pairwise") -> float:
    """Smallest gap between the best arm and any other, in units of reward spread.

    Marginal mode divides by ``sigma_best + sigma_i``; pairwise mode by the
    standard deviation of the per-index differences. A zero spread with a
    positive gap gives ``inf``; exactly tied means give 0.
    """
    D = population.arm_count
    if D < 2:
        return math.inf
    means = population.arm_means()
    best = int(np.argmax(means))
    rows = np.vstack([population.row(i) for i in range(D)]) if population.equal_sizes else None
    gaps = []
    for i in range(D):
        if i == best:
            continue
        diff = means[best] - means[i]
        if mode == "pairwise":
            if rows is None:
                raise ValueError("pairwise gap needs equal population sizes")
            spread = float(np.std(rows[best] - rows[i]))
        else:
            spread = float(np.std(population.row(best)) + np.std(population.row(i)))
        if spread == 0.0:
            gaps.append(math.inf if diff > 0 else 0.0)
        else:
            gaps.append(diff / spread)
    return float(min(gaps))


# ---------------------------------------------------------------------------
# Racing
# ---------------------------------------------------------------------------


@dataclass
class RacingConfig:
    """Settings for :func:`race`.

    ``m1`` defaults to 50 for the Normal bound and 2 for EBS. ``ranges`` are
    per-arm reward range bounds ``C_i``, required by EBS. ``b_value``
    overrides the Normal constant entirely.
    """

    delta: float = 0.05
    bound: str = "normal"
    variance: str = "pairwise"
    m1: int | None = None
    ranges: np.ndarray | float | None = None
    b_source: str = "solved"
    b_value: float | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.bound not in BOUNDS:
            raise ConfigurationError(f"bound must be one of {BOUNDS}")
        if self.variance not in VARIANCE_MODES:
            raise ConfigurationError(f"variance must be one of {VARIANCE_MODES}")
        if self.b_source not in B_SOURCES:
            raise ConfigurationError(f"b_source must be one of {B_SOURCES}")
        if self.m1 is None:
            self.m1 = 50 if self.bound == "normal" else 2
        if self.bound == "ebs" and self.m1 < 2:
            raise ConfigurationError("EBS needs m1 >= 2 for a usable variance estimate")
        if self.m1 < 1:
            raise ConfigurationError("m1 must be positive")


@dataclass
class RacingResult:
    winner: int
    counts: np.ndarray
    eliminated_at: np.ndarray
    trace: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self) -> str:
        d = asdict(self)
        d["counts"] = self.counts.tolist()
        d["eliminated_at"] = self.eliminated_at.tolist()
        d["total"] = self.total
        return json.dumps(d)


def _normal_constant(config: RacingConfig, level: float, schedule: BatchSchedule) -> float:
    if config.b_value is not None:
        return float(config.b_value)
    if schedule.horizon == 1:
        return 0.0
    if config.b_source == "simple":
        return b_simple(level, schedule.horizon)
    if config.b_source == "table":
        return interpolate_table(default_table(), level, schedule.m1 / schedule.N)
    return solve_b(level, schedule)


def _check(population: RewardPopulation, config: RacingConfig) -> np.ndarray | None:
    if config.variance != "independent" and not population.equal_sizes:
        raise ConfigurationError(f"{config.variance} mode needs equal population sizes; "
                                 "use variance='independent'")
    if config.bound == "ebs":
        if config.ranges is None:
            raise ConfigurationError("EBS racing needs reward range bounds C_i")
        ranges = np.broadcast_to(np.asarray(config.ranges, dtype=np.float64),
                                 (population.arm_count,)).copy()
        if np.any(ranges < 0):
            raise ConfigurationError("range bounds must be non-negative")
        return ranges
    return None


PAIR_BLOCK = 2_000_000


def _pair_batch_moments(L: np.ndarray):
    """Mean and squared-deviation sum of ``L[i] - L[j]`` for every pair of rows."""
    A, m = L.shape
    d_mean = np.empty((A, A))
    d_m2 = np.empty((A, A))
    rows = max(1, PAIR_BLOCK // (A * m))
    for s in range(0, A, rows):
        diff = L[s:s + rows, None, :] - L[None, :, :]
        mu = diff.mean(axis=2)
        d_mean[s:s + rows] = mu
        d_m2[s:s + rows] = ((diff - mu[..., None]) ** 2).sum(axis=2)
    return d_mean, d_m2


def race(population: RewardPopulation, config: RacingConfig, rng: np.random.Generator,
         schedule: BatchSchedule | None = None, *, trace: bool = True) -> RacingResult:
    """Identify the arm with the highest mean reward with confidence ``1 - delta``."""
    ranges = _check(population, config)
    if config.variance == "independent":
        return _race_independent(population, config, rng, ranges, trace)

    D, N = population.arm_count, population.size
    if schedule is None:
        schedule = build_schedule(N, min(config.m1, N))
    elif schedule.N != N:
        raise ConfigurationError("schedule does not end at the population size")
    pairwise = config.variance == "pairwise"
    level = config.delta / (D - 1 if pairwise else D) if D > 1 else config.delta
    B = _normal_constant(config, level, schedule) if config.bound == "normal" else None
    t_star = schedule.horizon

    alive = np.arange(D)
    eliminated_at = np.zeros(D, dtype=np.int64)
    counts = np.zeros(D, dtype=np.int64)
    count = 0
    mean = np.zeros(D)
    m2 = np.zeros(D)
    pair_mean = np.zeros((D, D)) if pairwise else None
    pair_m2 = np.zeros((D, D)) if pairwise else None
    sampler = IndexSampler(N, rng)
    steps = []

    t = 0
    while alive.size > 1:
        t += 1
        m = schedule.batch_sizes[t - 1]
        idx = sampler.draw(m)
        L = population.batch(alive, idx)
        b_mean = L.mean(axis=1)
        b_m2 = ((L - b_mean[:, None]) ** 2).sum(axis=1)
        _, mean[alive], m2[alive] = merge_moments(count, mean[alive], m2[alive], m, b_mean, b_m2)
        if pairwise:
            block = np.ix_(alive, alive)
            d_mean, d_m2 = _pair_batch_moments(L)
            _, pair_mean[block], pair_m2[block] = merge_moments(
                count, pair_mean[block], pair_m2[block], m, d_mean, d_m2)
        count += m
        counts[alive] += m

        if count == N:
            # exhausted: rank by exact population means
            mean[alive] = [population.arm_mean(i) for i in alive]
            bounds = np.zeros(alive.size)
        else:
            leader = alive[int(np.argmax(mean[alive]))]
            if pairwise:
                sd = np.sqrt(np.maximum(pair_m2[leader, alive], 0.0) / count)
                if B is not None:
                    bounds = g_normal(level, count, sd, N, B)
                else:
                    bounds = g_ebs(level, count, sd, ranges[leader] + ranges[alive], N, t_star)
            else:
                sd = np.sqrt(np.maximum(m2[alive], 0.0) / count)
                if B is not None:
                    g = g_normal(level, count, sd, N, B)
                else:
                    g = g_ebs(level, count, sd, ranges[alive], N, t_star)
                g_leader = g[alive == leader][0]
                bounds = g + g_leader
        leader = alive[int(np.argmax(mean[alive]))]
        gaps = mean[leader] - mean[alive]
        drop = gaps > bounds
        drop[alive == leader] = False
        eliminated_at[alive[drop]] = t
        if trace:
            steps.append({"iteration": t, "T": count, "candidates": int(alive.size),
                          "leader": int(leader), "eliminated": alive[drop].tolist(),
                          "max_bound": float(bounds.max()) if bounds.size else 0.0})
        alive = alive[~drop]
        if count == N and alive.size > 1:
            # exact ties: lowest index wins
            eliminated_at[alive[1:]] = t
            alive = alive[:1]

    return RacingResult(int(alive[0]), counts, eliminated_at, steps)


def _race_independent(population, config, rng, ranges, trace):
    D = population.arm_count
    sizes = population.sizes
    schedules = [build_schedule(n, min(config.m1, n)) for n in sizes]
    level = config.delta / D
    if config.bound == "normal":
        if config.b_value is not None:
            B = float(config.b_value)
        else:
            B = b_simple(level, max(s.horizon for s in schedules))
    streams = rng.spawn(D)
    samplers = [IndexSampler(int(n), s) for n, s in zip(sizes, streams)]
    counts = np.zeros(D, dtype=np.int64)
    mean = np.zeros(D)
    m2 = np.zeros(D)
    eliminated_at = np.zeros(D, dtype=np.int64)
    alive = np.arange(D)
    steps = []

    t = 0
    while alive.size > 1:
        t += 1
        for i in alive:
            sch = schedules[i]
            if t > sch.horizon:
                continue
            m = sch.batch_sizes[t - 1]
            vals = population.rewards(int(i), samplers[i].draw(m))
            b_mean = vals.mean()
            b_m2 = float(((vals - b_mean) ** 2).sum())
            counts[i], mean[i], m2[i] = merge_moments(counts[i], mean[i], m2[i], m, b_mean, b_m2)
            if counts[i] == sizes[i]:
                mean[i] = population.arm_mean(int(i))
        leader = alive[int(np.argmax(mean[alive]))]
        sd = np.sqrt(np.maximum(m2[alive], 0.0) / counts[alive])
        if config.bound == "normal":
            lead_sd = sd[alive == leader][0]
            bounds = g_normal_independent(level, counts[leader], counts[alive], lead_sd, sd,
                                          sizes[leader], sizes[alive], B)
        else:
            g = np.array([
                float(g_ebs(level, counts[i], sd[k], ranges[i], sizes[i], schedules[i].horizon))
                for k, i in enumerate(alive)])
            bounds = g + g[alive == leader][0]
        gaps = mean[leader] - mean[alive]
        drop = gaps > bounds
        drop[alive == leader] = False
        eliminated_at[alive[drop]] = t
        if trace:
            steps.append({"iteration": t, "T": counts[alive].tolist(), "candidates": int(alive.size),
                          "leader": int(leader), "eliminated": alive[drop].tolist(),
                          "max_bound": float(bounds.max())})
        alive = alive[~drop]
        if alive.size > 1 and np.all(counts[alive] == sizes[alive]):
            # survivors are exactly tied
            eliminated_at[alive[1:]] = t
            alive = alive[:1]

    return RacingResult(int(alive[0]), counts, eliminated_at, steps)


__all__ = [
    "KAPPA", "ConfigurationError", "RacingConfig", "RacingResult", "race",
    "g_ebs", "b_ebs", "serfling_rho", "g_normal", "g_normal_independent",
    "predicted_sample_bound", "normalized_gap", "doubling_ceil",
]
