"""Finite reward populations, without-replacement index sampling and streaming
statistics shared by every bandit algorithm in the package.

Arms and reward indices are 0-based throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._kernels import fisher_yates_take


class ExhaustedPopulationError(ValueError):
    """Raised when more indices are requested than remain in a population."""


class UnavailableBoundError(ValueError):
    """Raised when a reward range is needed but cannot be obtained cheaply."""


# ---------------------------------------------------------------------------
# Populations
# ---------------------------------------------------------------------------


class RewardPopulation:
    """Base class for a finite population of rewards ``l[i, n]``.

    Subclasses implement :meth:`rewards`. Populations are immutable and reads
    are deterministic, so one instance can be shared across threads.
    """

    materialized = False

    def __init__(self, sizes: Sequence[int]):
        sizes = np.asarray(sizes, dtype=np.int64)
        if sizes.ndim != 1 or sizes.size == 0:
            raise ValueError("sizes must be a non-empty 1-D sequence")
        if np.any(sizes < 1):
            raise ValueError("every arm needs at least one reward")
        self.sizes = sizes
        self._means: dict[int, float] = {}

    @property
    def arm_count(self) -> int:
        return int(self.sizes.size)

    @property
    def equal_sizes(self) -> bool:
        return bool(np.all(self.sizes == self.sizes[0]))

    @property
    def size(self) -> int:
        """Common population size ``N``; only defined for equal-size populations."""
        if not self.equal_sizes:
            raise ValueError("population sizes differ between arms")
        return int(self.sizes[0])

    def rewards(self, arm: int, indices) -> np.ndarray:
        raise NotImplementedError

    def batch(self, arms, indices) -> np.ndarray:
        """Rewards of several arms at shared indices, shape ``(len(arms), len(indices))``."""
        indices = np.asarray(indices, dtype=np.int64)
        return np.stack([self.rewards(int(a), indices) for a in arms])

    def reward(self, arm: int, n: int) -> float:
        return float(self.rewards(arm, np.array([n]))[0])

    def row(self, arm: int) -> np.ndarray:
        return self.rewards(arm, np.arange(self.sizes[arm]))

    def arm_mean(self, arm: int) -> float:
        """Exact full-population mean of one arm.

        This is the canonical mean used for exact comparisons: algorithms that
        exhaust an arm report this value, and :func:`exact_argmax` ranks by it.
        """
        arm = int(arm)
        if arm not in self._means:
            self._means[arm] = float(np.mean(self.row(arm)))
        return self._means[arm]

    def arm_means(self) -> np.ndarray:
        return np.array([self.arm_mean(i) for i in range(self.arm_count)])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(arms={self.arm_count}, sizes={self.sizes.tolist()[:4]}...)"


class ArrayPopulation(RewardPopulation):
    """Materialized equal-size population backed by a ``(D, N)`` array."""

    materialized = True

    def __init__(self, values):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array (arms x indices)")
        values.setflags(write=False)
        self.values = values
        super().__init__(np.full(values.shape[0], values.shape[1]))

    def rewards(self, arm, indices):
        return self.values[arm, indices]

    def batch(self, arms, indices):
        return self.values[np.ix_(np.asarray(arms), np.asarray(indices))]

    def row(self, arm):
        return self.values[arm]

    def arm_means(self):
        # one vectorized pass; identical rows give identical means
        missing = [i for i in range(self.arm_count) if i not in self._means]
        if missing:
            means = self.values.mean(axis=1)
            for i in missing:
                self._means[i] = float(means[i])
        return np.array([self._means[i] for i in range(self.arm_count)])

    def arm_mean(self, arm):
        arm = int(arm)
        if arm not in self._means:
            self.arm_means()
        return self._means[arm]


class RaggedPopulation(RewardPopulation):
    """Materialized population whose arms may hold different numbers of rewards."""

    materialized = True

    def __init__(self, rows: Sequence):
        self.rows = []
        for r in rows:
            r = np.array(r, dtype=np.float64).ravel()
            r.setflags(write=False)
            self.rows.append(r)
        super().__init__([r.size for r in self.rows])

    def rewards(self, arm, indices):
        return self.rows[arm][indices]

    def row(self, arm):
        return self.rows[arm]


class FunctionPopulation(RewardPopulation):
    """Lazy population evaluated on demand by ``fn(arm, indices) -> rewards``.

    ``fn`` must be deterministic; nothing is cached except exact arm means.
    """

    def __init__(self, sizes, fn: Callable[[int, np.ndarray], np.ndarray]):
        if np.isscalar(sizes):
            raise ValueError("sizes must list one population size per arm")
        super().__init__(sizes)
        self.fn = fn

    def rewards(self, arm, indices):
        indices = np.asarray(indices, dtype=np.int64)
        out = np.asarray(self.fn(int(arm), indices), dtype=np.float64)
        if out.shape != indices.shape:
            raise ValueError(f"reward function returned shape {out.shape}, expected {indices.shape}")
        return out


def as_population(obj) -> RewardPopulation:
    if isinstance(obj, RewardPopulation):
        return obj
    if isinstance(obj, (list, tuple)) and len({len(r) for r in obj}) > 1:
        return RaggedPopulation(obj)
    return ArrayPopulation(obj)


def load_population(path) -> RewardPopulation:
    """Load a materialized population (row = arm, column = index).

    ``.npy`` files are read as binary arrays; anything else is parsed as CSV
    of decimal reals.
    """
    path = Path(path)
    if path.suffix == ".npy":
        values = np.load(path)
    else:
        values = np.loadtxt(path, delimiter=",", ndmin=2)
    return ArrayPopulation(values)


def save_population(population: RewardPopulation, path) -> None:
    path = Path(path)
    values = np.vstack([population.row(i) for i in range(population.arm_count)])
    if path.suffix == ".npy":
        np.save(path, values)
    else:
        np.savetxt(path, values, delimiter=",", fmt="%.17g")


def range_bound(population: RewardPopulation, arm: int, bound: float | None = None) -> float:
    """Reward range ``C_i = max - min`` of one arm, or a caller-supplied bound.

    Scanning is only done for materialized populations; a lazy population
    without a user bound raises :class:`UnavailableBoundError`.
    """
    if bound is not None:
        if bound < 0:
            raise ValueError("range bound must be non-negative")
        return float(bound)
    if not population.materialized:
        raise UnavailableBoundError(
            f"arm {arm}: a range bound is required for lazily evaluated populations"
        )
    row = population.row(arm)
    return float(np.max(row) - np.min(row))


def range_bounds(population: RewardPopulation, bounds=None) -> np.ndarray:
    if bounds is None:
        return np.array([range_bound(population, i) for i in range(population.arm_count)])
    bounds = np.broadcast_to(np.asarray(bounds, dtype=np.float64), (population.arm_count,))
    return np.array([range_bound(population, i, b) for i, b in enumerate(bounds)])


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BatchSchedule:
    """Doubling mini-batch schedule ending exactly at the population size."""

    m1: int
    N: int
    cumulative: tuple[int, ...]

    @property
    def batch_sizes(self) -> tuple[int, ...]:
        prev = (0,) + self.cumulative[:-1]
        return tuple(c - p for c, p in zip(self.cumulative, prev))

    @property
    def horizon(self) -> int:
        return len(self.cumulative)

    @property
    def proportions(self) -> np.ndarray:
        return np.asarray(self.cumulative, dtype=np.float64) / self.N


def build_schedule(N: int, m1: int) -> BatchSchedule:
    """``T(1) = m1``, ``T(t) = min(2 T(t-1), N)`` until ``T = N``."""
    N, m1 = int(N), int(m1)
    if m1 < 1 or m1 > N:
        raise ValueError(f"first batch size must satisfy 1 <= m1 <= N, got m1={m1}, N={N}")
    cumulative = [m1]
    while cumulative[-1] < N:
        cumulative.append(min(2 * cumulative[-1], N))
    return BatchSchedule(m1=m1, N=N, cumulative=tuple(cumulative))


# ---------------------------------------------------------------------------
# Index sampling
# ---------------------------------------------------------------------------


class IndexSampler:
    """Draws distinct indices from ``range(N)`` via a lazily advanced shuffle.

    Each index costs one uniform from ``rng``; drawing in batches of any sizes
    yields the same sequence as drawing one at a time.
    """

    def __init__(self, N: int, rng: np.random.Generator):
        if N < 1:
            raise ValueError("N must be positive")
        self.N = int(N)
        self.rng = rng
        self.drawn = 0
        self._positions: np.ndarray | None = None

    @property
    def remaining(self) -> int:
        return self.N - self.drawn

    def draw(self, m: int) -> np.ndarray:
        m = int(m)
        if m < 0:
            raise ValueError("batch size must be non-negative")
        if m > self.remaining:
            raise ExhaustedPopulationError(
                f"requested {m} indices but only {self.remaining} of {self.N} remain"
            )
        if self._positions is None:
            self._positions = np.arange(self.N, dtype=np.int64)
        out = fisher_yates_take(self._positions, self.drawn, self.rng.random(m))
        self.drawn += m
        return out

    @property
    def consumed(self) -> np.ndarray:
        if self._positions is None:
            return np.empty(0, dtype=np.int64)
        return self._positions[: self.drawn].copy()


def draw_batch(sampler: IndexSampler, m: int) -> np.ndarray:
    return sampler.draw(m)


# ---------------------------------------------------------------------------
# Streaming statistics
# ---------------------------------------------------------------------------


def merge_moments(count, mean, m2, b_count, b_mean, b_m2):
    """Combine (count, mean, sum of squared deviations) of two disjoint samples.

    Works elementwise on arrays. Returns the merged triple.
    """
    total = count + b_count
    delta = b_mean - mean
    new_mean = mean + delta * (b_count / total)
    new_m2 = m2 + b_m2 + delta * delta * (count * b_count / total)
    return total, new_mean, new_m2


@dataclass
class _Moments:
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, values: np.ndarray) -> None:
        b_mean = float(np.mean(values))
        b_m2 = float(np.sum((values - b_mean) ** 2))
        self.count, self.mean, self.m2 = merge_moments(
            self.count, self.mean, self.m2, values.size, b_mean, b_m2
        )

    @property
    def variance(self) -> float:
        return self.m2 / self.count if self.count else math.nan


@dataclass
class ArmStats:
    """Without-replacement statistics of one arm.

    ``variance`` is the biased estimate (divides by the count). Pairwise
    accumulators track the variance of per-index differences ``l_i - l_j``
    for every partner ``j`` supplied to :meth:`update`.
    """

    moments: _Moments = field(default_factory=_Moments)
    low: float = math.inf
    high: float = -math.inf
    pairs: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.moments.count

    @property
    def mean(self) -> float:
        return self.moments.mean

    @property
    def variance(self) -> float:
        return self.moments.variance

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def observed_range(self) -> float:
        return self.high - self.low

    def pair_variance(self, other) -> float:
        return self.pairs[other].variance

    def update(self, rewards, paired: dict | None = None) -> "ArmStats":
        rewards = np.asarray(rewards, dtype=np.float64).ravel()
        if rewards.size == 0:
            raise ValueError("batch must be non-empty")
        if paired:
            for other, vals in paired.items():
                vals = np.asarray(vals, dtype=np.float64).ravel()
                if vals.shape != rewards.shape:
                    raise ValueError(
                        f"paired batch for {other!r} has length {vals.size}, expected {rewards.size}"
                    )
                self.pairs.setdefault(other, _Moments()).update(rewards - vals)
        self.moments.update(rewards)
        self.low = min(self.low, float(rewards.min()))
        self.high = max(self.high, float(rewards.max()))
        return self


def update_stats(stats: ArmStats, rewards, paired: dict | None = None) -> ArmStats:
    return stats.update(rewards, paired)
