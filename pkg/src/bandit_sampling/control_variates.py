"""Control variates for reward populations.

Subtracting a cheap surrogate ``h[i, n]`` with a known population mean and
adding the mean back keeps every arm mean unchanged while removing most of
the variance the surrogate explains. The second-order Taylor surrogate of a
log-likelihood in the data point ``y_n`` has a mean available from the first
two moments of the data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rewards import ArrayPopulation, FunctionPopulation, RaggedPopulation, RewardPopulation


class ControlVariate:
    """Surrogate rewards ``h(arm, indices)`` with per-arm population means."""

    def __init__(self, h: Callable[[int, np.ndarray], np.ndarray], means):
        self._h = h
        self.means = np.asarray(means, dtype=np.float64)

    def h(self, arm: int, indices) -> np.ndarray:
        return np.asarray(self._h(int(arm), np.asarray(indices, dtype=np.int64)), dtype=np.float64)

    def mean(self, arm: int) -> float:
        return float(self.means[arm])

    @classmethod
    def from_population(cls, surrogate: RewardPopulation) -> "ControlVariate":
        """Wrap a surrogate population; its means come from a full scan."""
        return cls(surrogate.rewards, surrogate.arm_means())


@dataclass
class TaylorCV(ControlVariate):
    """Second-order expansion of each arm's log-likelihood around ``ref``.

    ``data`` holds one row per reward index. ``data_mean`` and ``data_cov``
    default to the population moments of ``data``; passing analytic moments
    instead shifts each surrogate mean by the moment error.
    """

    data: np.ndarray
    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray
    ref: np.ndarray | None = None
    data_mean: np.ndarray | None = None
    data_cov: np.ndarray | None = None
    means: np.ndarray = field(init=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        d = self.data.shape[1]
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        D = self.values.size
        self.grads = np.asarray(self.grads, dtype=np.float64).reshape(D, d)
        self.hessians = np.asarray(self.hessians, dtype=np.float64).reshape(D, d, d)
        if not np.allclose(self.hessians, np.swapaxes(self.hessians, 1, 2)):
            raise ValueError("Hessians must be symmetric")
        if self.data_mean is None:
            self.data_mean = self.data.mean(axis=0)
        if self.data_cov is None:
            centered = self.data - self.data_mean
            self.data_cov = centered.T @ centered / self.data.shape[0]
        self.data_mean = np.asarray(self.data_mean, dtype=np.float64).reshape(d)
        self.data_cov = np.asarray(self.data_cov, dtype=np.float64).reshape(d, d)
        self.ref = self.data_mean.copy() if self.ref is None else np.asarray(self.ref, dtype=np.float64).reshape(d)
        self.means = np.array([taylor_mean(self, i) for i in range(D)])

    @classmethod
    def expand(cls, data, derivatives: Callable, arm_count: int, ref=None, **moments) -> "TaylorCV":
        """Build from ``derivatives(arm, ref) -> (value, gradient, hessian)``."""
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        point = data.mean(axis=0) if ref is None else np.asarray(ref, dtype=np.float64)
        parts = [derivatives(i, point) for i in range(arm_count)]
        values, grads, hessians = (np.array([p[k] for p in parts]) for k in range(3))
        return cls(data, values, grads, hessians, ref=point, **moments)

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def h(self, arm: int, indices) -> np.ndarray:
        return taylor_h(self, arm, self.data[np.asarray(indices, dtype=np.int64)])


def taylor_h(cv: TaylorCV, arm: int, y) -> np.ndarray | float:
    """Quadratic surrogate at data point(s) ``y`` (shape ``(d,)`` or ``(m, d)``)."""
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1 and cv.dim > 1 or y.ndim == 0
    y = np.atleast_2d(y) if cv.dim > 1 else y.reshape(-1, 1)
    if y.shape[1] != cv.dim:
        raise ValueError(f"data point has dimension {y.shape[1]}, expected {cv.dim}")
    dy = y - cv.ref
    out = (cv.values[arm] + dy @ cv.grads[arm]
           + 0.5 * np.einsum("mi,ij,mj->m", dy, cv.hessians[arm], dy))
    return float(out[0]) if single else out


def taylor_mean(cv: TaylorCV, arm: int) -> float:
    """Population mean of the surrogate from the data mean and covariance."""
    dm = cv.data_mean - cv.ref
    H = cv.hessians[arm]
    return float(cv.values[arm] + cv.grads[arm] @ dm + 0.5 * (dm @ H @ dm + np.trace(H @ cv.data_cov)))


def residual_population(population: RewardPopulation, cv: ControlVariate,
                        outliers=None) -> RewardPopulation:
    """Rewards ``l - h + mean(h)``, which keep every arm mean unchanged.

    ``outliers`` lists indices that are summed exactly instead of sampled.
    The result then covers the remaining ``N' = N - |outliers|`` indices
    (renumbered ``0..N'-1``) with rewards scaled by ``N'/N`` plus the outlier
    total over ``N``, so arm means are still preserved.
    """
    D = population.arm_count
    sizes = population.sizes
    if outliers is None or len(outliers) == 0:
        def fn(arm, idx):
            return population.rewards(arm, idx) - cv.h(arm, idx) + cv.means[arm]
        if population.materialized:
            rows = [fn(i, np.arange(sizes[i])) for i in range(D)]
            return ArrayPopulation(rows) if population.equal_sizes else RaggedPopulation(rows)
        return FunctionPopulation(sizes, fn)

    if not population.equal_sizes:
        raise ValueError("outlier carve-out needs equal population sizes")
    N = population.size
    out_idx = np.unique(np.asarray(outliers, dtype=np.int64))
    if out_idx[0] < 0 or out_idx[-1] >= N:
        raise ValueError("outlier index out of range")
    kept = np.setdiff1d(np.arange(N), out_idx)
    if kept.size == 0:
        raise ValueError("outliers cover the whole population")
    n_kept = kept.size
    exact_part = np.array([population.rewards(i, out_idx).sum() for i in range(D)]) / N
    # mean of h over the kept indices, from its full mean and the outlier terms
    kept_means = np.array([(N * cv.means[i] - cv.h(i, out_idx).sum()) / n_kept for i in range(D)])
    scale = n_kept / N

    def fn(arm, idx):
        src = kept[idx]
        resid = population.rewards(arm, src) - cv.h(arm, src) + kept_means[arm]
        return scale * resid + exact_part[arm]

    if population.materialized:
        return ArrayPopulation([fn(i, np.arange(n_kept)) for i in range(D)])
    return FunctionPopulation(np.full(D, n_kept), fn)


__all__ = ["ControlVariate", "TaylorCV", "taylor_h", "taylor_mean", "residual_population"]
