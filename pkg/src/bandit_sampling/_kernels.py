"""Compiled inner loops.

Both kernels consume pre-drawn uniforms so that the Python and compiled code
paths see identical random streams.
"""
import math

import numpy as np
from numba import njit

# lil'UCB kernel status codes
DONE = 0
NEED_UNIFORMS = 1
EXHAUSTED = 2


@njit(cache=True)
def fisher_yates_take(positions, start, uniforms):
    """Advance a partial Fisher-Yates shuffle by ``len(uniforms)`` steps.

    ``positions[:start]`` holds the indices already drawn. Returns the newly
    drawn indices, in draw order.
    """
    n = positions.shape[0]
    m = uniforms.shape[0]
    out = np.empty(m, dtype=np.int64)
    for s in range(m):
        k = start + s
        j = k + int(uniforms[s] * (n - k))
        if j >= n:
            j = n - 1
        tmp = positions[k]
        positions[k] = positions[j]
        positions[j] = tmp
        out[s] = positions[k]
    return out


@njit(cache=True)
def _bonus(count, scale, delta, eps, beta):
    t = float(count)
    inner = math.log(math.log((1.0 + eps) * t + 2.0) / delta)
    return (1.0 + beta) * (1.0 + math.sqrt(eps)) * scale * math.sqrt(
        2.0 * (1.0 + eps) * inner / t
    )


@njit(cache=True)
def lil_ucb_loop(values, positions, uniforms, cursor, counts, means, ucb, exact,
                 scale, delta, eps, beta, lam):
    """Run adapted lil'UCB until it stops or needs service from Python.

    Returns ``(status, arm)``. ``EXHAUSTED`` asks the caller to install the
    exact population mean of ``arm`` and resume; ``NEED_UNIFORMS`` asks for a
    fresh uniform buffer for ``arm``.
    """
    n_arms, n_pop = values.shape
    n_buf = uniforms.shape[1]
    total = 0
    for i in range(n_arms):
        total += counts[i]
    while True:
        best = 0
        for i in range(1, n_arms):
            if ucb[i] > ucb[best]:
                best = i
        if counts[best] == n_pop:
            return DONE, best
        if cursor[best] == n_buf:
            return NEED_UNIFORMS, best
        k = counts[best]
        j = k + int(uniforms[best, cursor[best]] * (n_pop - k))
        cursor[best] += 1
        if j >= n_pop:
            j = n_pop - 1
        tmp = positions[best, k]
        positions[best, k] = positions[best, j]
        positions[best, j] = tmp
        x = values[best, positions[best, k]]
        counts[best] = k + 1
        total += 1
        means[best] += (x - means[best]) / (k + 1)
        if counts[best] == n_pop:
            exact[best] = True
            return EXHAUSTED, best
        ucb[best] = means[best] + _bonus(counts[best], scale[best], delta, eps, beta)
        # the stopping rule applies once every arm holds one sample
        if total >= n_arms and counts[best] >= 1.0 + lam * (total - counts[best]):
            return DONE, best
