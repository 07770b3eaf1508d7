"""Gumbel-Max reduction of discrete sampling to best-arm identification.

For a target ``p(x) ∝ f_0(x) * prod_n f_n(x)`` with standard Gumbel noise
``eps``, the arm with the largest mean reward

    l[i, n] = log f_n(i) + (log f_0(i) + eps_i) / N

is an exact draw from ``p``.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .rewards import ArrayPopulation, FunctionPopulation, RaggedPopulation, RewardPopulation


class FactorOracle:
    """Evaluates the log-factors ``log f_n(i)`` and ``log f_0(i)`` of a target.

    ``log_factors(arm, indices)`` returns ``log f_n(arm)`` for each index
    ``n`` in ``indices``. Arms may carry different numbers of factors.
    """

    def __init__(self, sizes: Sequence[int], log_factors: Callable, log_base=None,
                 dense: np.ndarray | None = None, rows: list | None = None):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self._log_factors = log_factors
        base = np.zeros(self.sizes.size) if log_base is None else np.asarray(log_base, dtype=np.float64)
        if base.shape != self.sizes.shape:
            raise ValueError("log_base needs one entry per arm")
        self.log_base = base
        self.dense = dense
        self.rows = rows
        self._finite_checked = False

    @classmethod
    def from_arrays(cls, log_factors, log_base=None) -> "FactorOracle":
        """Oracle over precomputed log-factors: a ``(D, N)`` array or a list of rows."""
        if isinstance(log_factors, (list, tuple)) and len({len(r) for r in log_factors}) > 1:
            rows = [np.asarray(r, dtype=np.float64) for r in log_factors]
            return cls([r.size for r in rows], lambda i, idx: rows[i][idx], log_base, rows=rows)
        dense = np.asarray(log_factors, dtype=np.float64)
        if dense.ndim != 2:
            raise ValueError("log_factors must be 2-D")
        return cls(np.full(dense.shape[0], dense.shape[1]), lambda i, idx: dense[i, idx],
                   log_base, dense=dense)

    @property
    def arm_count(self) -> int:
        return int(self.sizes.size)

    def log_factors(self, arm: int, indices) -> np.ndarray:
        return np.asarray(self._log_factors(int(arm), np.asarray(indices, dtype=np.int64)),
                          dtype=np.float64)

    def log_unnormalized(self) -> np.ndarray:
        """``log p~(i)`` for every arm; evaluates all factors."""
        return np.array([
            np.sum(self.log_factors(i, np.arange(n))) + self.log_base[i]
            for i, n in enumerate(self.sizes)
        ])

    def probabilities(self) -> np.ndarray:
        logp = self.log_unnormalized()
        w = np.exp(logp - logp.max())
        return w / w.sum()


def gumbel_from_uniform(u):
    """``-log(-log(u))``; ``u`` must lie strictly inside (0, 1)."""
    return -np.log(-np.log(u))


def sample_gumbel(rng: np.random.Generator, size=None):
    """Standard Gumbel draws. Uniforms equal to 0 are redrawn so the output is finite."""
    if size is None:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return float(gumbel_from_uniform(u))
    u = rng.random(size)
    bad = u == 0.0
    while np.any(bad):
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return gumbel_from_uniform(u)


def _check_finite(values: np.ndarray, arm: int, indices) -> None:
    if not np.all(np.isfinite(values)):
        k = int(np.flatnonzero(~np.isfinite(values))[0])
        n = int(np.asarray(indices).ravel()[k]) if np.ndim(indices) else int(indices)
        raise ValueError(f"non-finite log-factor at (n={n}, i={arm}); exclude impossible states first")


def perturb(oracle: FactorOracle, eps) -> RewardPopulation:
    """Reward population whose arm means are ``(log p~(i) + eps_i) / N``.

    With unequal factor counts each arm's rewards are rescaled by ``N_i / N``
    (``N`` the largest count) so the arm means keep ordering the perturbed
    log-probabilities.
    """
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != oracle.sizes.shape:
        raise ValueError("need one Gumbel variable per arm")
    if not np.all(np.isfinite(oracle.log_base)):
        i = int(np.flatnonzero(~np.isfinite(oracle.log_base))[0])
        raise ValueError(f"non-finite base factor log f_0 at i={i}")
    sizes = oracle.sizes
    n_ref = int(sizes.max())
    offsets = (oracle.log_base + eps) / sizes

    if oracle.dense is not None:
        dense = oracle.dense
        if not oracle._finite_checked:
            if not np.all(np.isfinite(dense)):
                i, n = np.argwhere(~np.isfinite(dense))[0]
                raise ValueError(f"non-finite log-factor at (n={n}, i={i}); exclude impossible states first")
            oracle._finite_checked = True
        return ArrayPopulation(dense + offsets[:, None])

    scales = sizes / n_ref
    if oracle.rows is not None:
        for i, r in enumerate(oracle.rows):
            _check_finite(r, i, np.arange(r.size))
        return RaggedPopulation([(r + offsets[i]) * scales[i] for i, r in enumerate(oracle.rows)])

    def fn(arm, indices):
        vals = oracle.log_factors(arm, indices)
        _check_finite(vals, arm, indices)
        return (vals + offsets[arm]) * scales[arm]

    return FunctionPopulation(sizes, fn)


def exact_sample_cdf(weights, u: float) -> int:
    """Inverse-CDF draw: the ``x`` with ``F(x-1) < u <= F(x)``."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or not np.isfinite(w).all():
        raise ValueError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights sum to zero: not a distribution")
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    cdf = np.cumsum(w) / total
    x = int(np.searchsorted(cdf, u, side="left"))
    # u == 1 can sit above a rounded-down cdf[-1]; fall back to the last positive arm
    return min(x, int(np.flatnonzero(w > 0)[-1]))


def exact_argmax(population: RewardPopulation) -> int:
    """Arm with the highest full-population mean; ties go to the lowest index."""
    return int(np.argmax(population.arm_means()))


def exact_gumbel_sample(oracle: FactorOracle, rng: np.random.Generator) -> int:
    return exact_argmax(perturb(oracle, sample_gumbel(rng, oracle.arm_count)))
