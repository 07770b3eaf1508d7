"""Calibration constant for the Normal racing bound.

Under the normal approximation the running means of a doubling schedule,
standardized by their marginal standard deviation, form a Gaussian AR(1)
walk ``Z_t = rho_t Z_{t-1} + sqrt(1 - rho_t^2) xi_t`` with
``rho_t^2 = A_t``. The constant ``B`` is chosen so that the walk leaves the
band ``|Z_t| <= B`` before the last batch with probability ``2 delta``
(``delta`` per tail). The crossing probability is computed by propagating the
sub-threshold density on a fixed grid.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.signal import fftconvolve
from scipy.special import ndtr, ndtri

from .rewards import BatchSchedule

TABLE_DELTAS = (
    1e-6, 3e-6, 5e-6, 7e-6, 9e-6, 1e-5, 3e-5, 5e-5, 7e-5, 9e-5,
    1e-4, 3e-4, 5e-4, 7e-4, 9e-4, 1e-3, 3e-3, 5e-3, 7e-3, 9e-3,
    1e-2, 3e-2, 5e-2, 7e-2, 9e-2, 0.1, 0.13, 0.16, 0.19, 0.22,
    0.25, 0.28, 0.31, 0.34, 0.37, 0.4, 0.43, 0.46, 0.49,
)
TABLE_PROPORTIONS = (5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2)

GRID_POINTS = 4001
GRID_HALF_WIDTH = 8.0


def proportions_from_first(pi1: float) -> np.ndarray:
    """Cumulative sampled fractions of a doubling schedule starting at ``pi1``."""
    if not 0.0 < pi1 <= 1.0:
        raise ValueError("first-batch proportion must lie in (0, 1]")
    props = [pi1]
    while props[-1] < 1.0:
        props.append(min(2.0 * props[-1], 1.0))
    return np.array(props)


def _proportions(schedule) -> np.ndarray:
    if isinstance(schedule, BatchSchedule):
        return schedule.proportions
    props = np.asarray(schedule, dtype=np.float64)
    if props.ndim != 1 or props.size == 0 or props[-1] != 1.0:
        raise ValueError("schedule proportions must be increasing and end at 1")
    if np.any(np.diff(props) <= 0) or props[0] <= 0:
        raise ValueError("schedule proportions must be increasing and positive")
    return props


def walk_params(schedule: BatchSchedule, t: int) -> tuple[float, float, float]:
    """Transition coefficients ``(A_t, B_t, S_t)`` of the unit-variance walk.

    ``t`` is 1-based and must satisfy ``2 <= t <= t*``.
    """
    if not 2 <= t <= schedule.horizon:
        raise ValueError(f"step t={t} outside 2..{schedule.horizon}")
    N = schedule.N
    prev, cur = schedule.proportions[t - 2], schedule.proportions[t - 1]
    a = prev * (1 - cur) / (cur * (1 - prev))
    b = (cur - prev) / (cur * (1 - prev))
    T = schedule.cumulative[t - 1]
    s = b / T * (1 - (T - 1) / (N - 1))
    return float(a), float(b), float(s)


def marginal_variance(schedule: BatchSchedule, t: int) -> float:
    """Variance of the unit-variance running mean after ``t`` batches."""
    T, N = schedule.cumulative[t - 1], schedule.N
    if N == 1:
        return 0.0
    return 1.0 / T * (1 - (T - 1) / (N - 1))


def _grid(n_points: int, half_width: float, barrier: float = 0.0) -> tuple[np.ndarray, int]:
    """Symmetric grid with ``barrier`` on a node; returns ``(z, k)`` with ``z[mid + k] == barrier``.

    The spacing is at most ``2 * half_width / (n_points - 1)``.
    """
    if n_points < 2001:
        raise ValueError("grid needs at least 2001 points")
    dz = 2.0 * half_width / (n_points - 1)
    k = int(math.ceil(barrier / dz)) if barrier > 0 else 0
    if k:
        dz = barrier / k
    half = int(math.ceil(half_width / dz))
    return np.arange(-half, half + 1) * dz, k


def _step(f, z, rho):
    """Density of ``rho * Z + sqrt(1 - rho^2) * xi`` on the grid, given density ``f`` of Z."""
    dz = z[1] - z[0]
    s = math.sqrt(1.0 - rho * rho)
    x = z / rho
    inside = np.abs(x) <= z[-1]
    g = np.zeros_like(f)
    g[inside] = CubicSpline(z, f)(x[inside]) / rho
    half = int(math.ceil(GRID_HALF_WIDTH * s / dz))
    k = np.arange(-half, half + 1) * dz
    kernel = np.exp(-0.5 * (k / s) ** 2)
    kernel /= kernel.sum()
    return np.clip(fftconvolve(g, kernel, mode="same"), 0.0, None)


def _rhos(props: np.ndarray) -> np.ndarray:
    prev, cur = props[:-1], props[1:]
    return np.sqrt(prev * (1 - cur) / (cur * (1 - prev)))


def crossing_prob(B: float, schedule, *, two_sided: bool = True,
                  n_points: int = GRID_POINTS, half_width: float = GRID_HALF_WIDTH) -> float:
    """Probability that the standardized walk crosses ``B`` at some ``t < t*``.

    With ``two_sided`` (the default) the walk is stopped at ``|Z_t| > B`` and
    the exit probability is halved, i.e. the per-tail probability. With
    ``two_sided=False`` only upward crossings ``Z_t > B`` count. Both agree to
    leading order for small crossing probabilities.
    """
    if B < 0:
        raise ValueError("B must be non-negative")
    props = _proportions(schedule)
    tested = props.size - 1
    if tested == 0 or math.isinf(B):
        return 0.0
    if B >= half_width:
        # the barrier sits beyond the grid; only the first step's tail matters
        return float(ndtr(-B))
    z, k = _grid(n_points, half_width, B)
    mid = z.size // 2
    up, down = mid + k, mid - k
    f = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    tails = 2.0 if two_sided else 1.0
    total = tails * float(ndtr(-B))
    rhos = _rhos(props)
    for t in range(1, tested):
        # truncate at the barrier node; it keeps half its cell (trapezoid weight)
        f[up + 1:] = 0.0
        f[up] *= 0.5
        if two_sided:
            f[:down] = 0.0
            f[down] *= 0.5
        f = _step(f, z, rhos[t - 1])
        total += float(np.trapezoid(f[up:], z[up:]))
        if two_sided:
            total += float(np.trapezoid(f[:down + 1], z[:down + 1]))
    return total / tails


def propagate_density(schedule, t: int, *, n_points: int = GRID_POINTS,
                      half_width: float = GRID_HALF_WIDTH) -> tuple[np.ndarray, np.ndarray]:
    """Untruncated standardized density after ``t`` batches (1-based).

    Returns ``(z, density)``; the density should be standard normal.
    """
    props = _proportions(schedule)
    z, _ = _grid(n_points, half_width)
    f = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    for rho in _rhos(props)[: t - 1]:
        f = _step(f, z, rho)
    return z, f


def simulate_crossing(B: float, schedule, n_walks: int, rng: np.random.Generator, *,
                      two_sided: bool = True, chunk: int = 200_000) -> tuple[float, float]:
    """Monte Carlo estimate of :func:`crossing_prob` and its standard error."""
    props = _proportions(schedule)
    rhos = _rhos(props)
    tested = props.size - 1
    hits = 0.0
    done = 0
    while done < n_walks:
        n = min(chunk, n_walks - done)
        z = rng.standard_normal(n)
        up = z > B
        down = z < -B
        for t in range(1, tested):
            r = rhos[t - 1]
            z = r * z + math.sqrt(1 - r * r) * rng.standard_normal(n)
            up |= z > B
            down |= z < -B
        if two_sided:
            hits += 0.5 * float(np.count_nonzero(up | down))
        else:
            hits += float(np.count_nonzero(up))
        done += n
    p = hits / n_walks
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n_walks)


def b_simple(delta: float, t_star: int) -> float:
    """Union-bound constant ``Phi^-1(1 - delta / (t* - 1))``."""
    if t_star <= 1:
        return 0.0
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    q = delta / (t_star - 1)
    return float(max(ndtri(1.0 - q), 0.0))


@lru_cache(maxsize=512)
def _solve_cached(delta: float, props: tuple, tol: float) -> float:
    arr = np.array(props)
    hi = b_simple(min(delta, 0.5), arr.size) + 0.5
    if delta >= 0.5:
        return 0.0
    return float(brentq(lambda b: crossing_prob(b, arr) - delta, 0.0, hi, xtol=tol))


def solve_b(delta: float, schedule, *, tol: float = 1e-5) -> float:
    """Smallest ``B`` with crossing probability ``delta`` for this schedule."""
    if not 0.0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 0.5]")
    if delta < TABLE_DELTAS[0] or delta > TABLE_DELTAS[-1]:
        warnings.warn(f"delta={delta:g} lies outside the tabulated range "
                      f"[{TABLE_DELTAS[0]:g}, {TABLE_DELTAS[-1]:g}]", stacklevel=2)
    props = _proportions(schedule)
    if props.size == 1:
        return 0.0
    return _solve_cached(float(delta), tuple(props.tolist()), tol)


def solve_b_first(delta: float, pi1: float, **kwargs) -> float:
    return solve_b(delta, proportions_from_first(pi1), **kwargs)


@dataclass
class BNormalTable:
    """Grid of ``B`` values indexed by ``delta`` (rows) and first-batch proportion (columns)."""

    deltas: np.ndarray
    proportions: np.ndarray
    values: np.ndarray

    @classmethod
    def generate(cls, deltas=TABLE_DELTAS, proportions=TABLE_PROPORTIONS) -> "BNormalTable":
        deltas = np.asarray(deltas, dtype=np.float64)
        proportions = np.asarray(proportions, dtype=np.float64)
        values = np.array([[solve_b_first(d, p) for p in proportions] for d in deltas])
        return cls(deltas, proportions, values)

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, Path))
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta"] + [f"{p:.1e}" for p in self.proportions])
            for d, row in zip(self.deltas, self.values):
                w.writerow([f"{d:.1e}"] + [f"{v:.5f}" for v in row])
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path_or_file) -> "BNormalTable":
        own = isinstance(path_or_file, (str, Path))
        fh = open(path_or_file, newline="") if own else path_or_file
        try:
            rows = list(csv.reader(fh))
        finally:
            if own:
                fh.close()
        proportions = np.array([float(x) for x in rows[0][1:]])
        deltas = np.array([float(r[0]) for r in rows[1:]])
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(deltas, proportions, values)

    def lookup(self, delta: float, pi1: float) -> float:
        return interpolate_table(self, delta, pi1)


def interpolate_table(table: BNormalTable, delta: float, pi1: float) -> float:
    """Bilinear interpolation in ``(log delta, log pi1)``; solves directly outside the grid."""
    ld, lp = np.log(table.deltas), np.log(table.proportions)
    x, y = math.log(delta), math.log(pi1)
    if not (ld[0] <= x <= ld[-1] and lp[0] <= y <= lp[-1]):
        return solve_b_first(delta, pi1)
    i = int(np.clip(np.searchsorted(ld, x, side="right") - 1, 0, ld.size - 2))
    j = int(np.clip(np.searchsorted(lp, y, side="right") - 1, 0, lp.size - 2))
    u = (x - ld[i]) / (ld[i + 1] - ld[i])
    v = (y - lp[j]) / (lp[j + 1] - lp[j])
    V = table.values
    return float((1 - u) * (1 - v) * V[i, j] + u * (1 - v) * V[i + 1, j]
                 + (1 - u) * v * V[i, j + 1] + u * v * V[i + 1, j + 1])


@lru_cache(maxsize=1)
def default_table() -> BNormalTable:
    """Table shipped with the package, generated by :meth:`BNormalTable.generate`."""
    with resources.files(__package__).joinpath("data/bnormal_table.csv").open() as fh:
        return BNormalTable.from_csv(fh)
