"""lil'UCB best-arm identification adapted to finite populations.

Each arm is sampled without replacement from its own stream. An exhausted
arm's confidence bonus drops to zero and its mean becomes exact; the run stops
when one arm dominates the pull counts or when the top-ranked arm is exhausted.

Dense populations run in a compiled loop. Lazy populations use a Python loop
that consumes the random streams identically, so both paths return the same
result for the same seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._kernels import DONE, EXHAUSTED, NEED_UNIFORMS, _bonus, lil_ucb_loop
from .rewards import ArrayPopulation, IndexSampler, RewardPopulation, range_bounds

UNIFORM_BUFFER = 1024


@dataclass
class LilUcbConfig:
    """Settings for :func:`lil_ucb`.

    The defaults (``eps=0``, ``beta=0.5``, ``lam=1 + 10/D``) are the common
    heuristic tuning, which trades the formal guarantee for speed. ``scale``
    is the sub-Gaussian scale per arm; when omitted it is half the reward
    range, taken from ``ranges`` or a scan of a materialized population.
    """

    delta: float = 0.05
    eps: float = 0.0
    beta: float = 0.5
    lam: float | None = None
    scale: np.ndarray | float | None = None
    ranges: np.ndarray | float | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be positive")

    def stop_ratio(self, D: int) -> float:
        return self.lam if self.lam is not None else 1.0 + 10.0 / D

    def scales(self, population: RewardPopulation) -> np.ndarray:
        D = population.arm_count
        if self.scale is not None:
            s = np.broadcast_to(np.asarray(self.scale, dtype=np.float64), (D,)).copy()
            if np.any(s < 0):
                raise ValueError("scale must be non-negative")
            return s
        return range_bounds(population, self.ranges) / 2.0


@dataclass
class LilUcbResult:
    winner: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self) -> str:
        return json.dumps({"winner": self.winner, "counts": self.counts.tolist(), "total": self.total})


def _stops(counts, arm, lam) -> bool:
    total = counts.sum()
    if total < counts.size:
        return False
    return counts[arm] >= 1.0 + lam * (total - counts[arm])


def lil_ucb(population: RewardPopulation, config: LilUcbConfig, rng: np.random.Generator,
            *, compiled: bool | None = None) -> LilUcbResult:
    """Return the arm judged best, drawing one reward per step.

    Arm ``i`` samples from the ``i``-th child of ``rng.spawn``. ``compiled``
    forces (or forbids) the compiled loop; by default it is used whenever
    the population is a dense array.
    """
    D = population.arm_count
    scale = config.scales(population)
    lam = config.stop_ratio(D)
    streams = rng.spawn(D)
    dense = isinstance(population, ArrayPopulation)
    if compiled is None:
        compiled = dense
    if compiled and not dense:
        raise ValueError("the compiled loop needs a dense ArrayPopulation")
    if compiled:
        return _run_compiled(population, config, streams, scale, lam)
    return _run_python(population, config, streams, scale, lam)


def _run_python(population, config, streams, scale, lam):
    D = population.arm_count
    sizes = population.sizes
    samplers = [IndexSampler(int(n), s) for n, s in zip(sizes, streams)]
    counts = np.zeros(D, dtype=np.int64)
    means = np.zeros(D)
    ucb = np.full(D, np.inf)
    while True:
        best = int(np.argmax(ucb))
        if counts[best] == sizes[best]:
            break
        x = population.rewards(best, samplers[best].draw(1))[0]
        k = counts[best]
        counts[best] = k + 1
        means[best] += (x - means[best]) / (k + 1)
        if counts[best] == sizes[best]:
            means[best] = population.arm_mean(best)
            ucb[best] = means[best]
        else:
            ucb[best] = means[best] + _bonus(counts[best], scale[best], config.delta,
                                             config.eps, config.beta)
        if _stops(counts, best, lam):
            break
    return LilUcbResult(best, counts)


def _run_compiled(population, config, streams, scale, lam):
    values = population.values
    D, N = values.shape
    positions = np.tile(np.arange(N, dtype=np.int64), (D, 1))
    k = min(N, UNIFORM_BUFFER)
    uniforms = np.stack([s.random(k) for s in streams])
    cursor = np.zeros(D, dtype=np.int64)
    counts = np.zeros(D, dtype=np.int64)
    means = np.zeros(D)
    ucb = np.full(D, np.inf)
    exact = np.zeros(D, dtype=np.bool_)
    while True:
        status, arm = lil_ucb_loop(values, positions, uniforms, cursor, counts, means, ucb,
                                   exact, scale, config.delta, config.eps, config.beta, lam)
        if status == DONE:
            return LilUcbResult(int(arm), counts)
        if status == NEED_UNIFORMS:
            uniforms[arm] = streams[arm].random(k)
            cursor[arm] = 0
        elif status == EXHAUSTED:
            means[arm] = population.arm_mean(arm)
            ucb[arm] = means[arm]
            if _stops(counts, arm, lam):
                return LilUcbResult(int(arm), counts)


__all__ = ["LilUcbConfig", "LilUcbResult", "lil_ucb"]
