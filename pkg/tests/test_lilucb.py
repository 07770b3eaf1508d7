import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bandit_sampling.gumbel import exact_argmax
from bandit_sampling.lilucb import LilUcbConfig, lil_ucb
from bandit_sampling.rewards import (ArrayPopulation, FunctionPopulation, RaggedPopulation,
                                     UnavailableBoundError)


def lazy_copy(pop):
    vals = pop.values
    return FunctionPopulation(pop.sizes, lambda i, idx: vals[i, idx])


def test_single_arm_stops_after_one_pull(rng):
    res = lil_ucb(ArrayPopulation(rng.random((1, 50))), LilUcbConfig(), rng)
    assert res.winner == 0
    assert res.total == 1


def test_constant_identical_arms(rng):
    pop = ArrayPopulation(np.full((4, 30), 2.5))
    res = lil_ucb(pop, LilUcbConfig(), rng)
    assert res.total <= 4 * 30
    assert pop.arm_mean(res.winner) == 2.5


@given(st.integers(1, 5), st.integers(1, 60), st.integers(0, 2**32 - 1),
       st.sampled_from([None, 1.0, 100.0]), st.floats(0.0, 1.0))
def test_compiled_and_python_paths_agree(D, N, seed, lam, eps):
    vals = np.random.default_rng(seed).normal(size=(D, N)) + np.arange(D)[:, None] * 0.05
    pop = ArrayPopulation(vals)
    cfg = LilUcbConfig(delta=0.1, lam=lam, eps=eps)
    a = lil_ucb(pop, cfg, np.random.default_rng(seed + 1))
    cfg_lazy = LilUcbConfig(delta=0.1, lam=lam, eps=eps, ranges=np.ptp(vals, axis=1))
    b = lil_ucb(lazy_copy(pop), cfg_lazy, np.random.default_rng(seed + 1))
    assert a.winner == b.winner
    assert a.counts.tolist() == b.counts.tolist()


@given(st.integers(1, 6), st.integers(1, 80), st.integers(0, 2**32 - 1), st.floats(0.01, 50.0))
def test_pull_caps(D, N, seed, lam):
    pop = ArrayPopulation(np.random.default_rng(seed).random((D, N)))
    res = lil_ucb(pop, LilUcbConfig(lam=lam), np.random.default_rng(seed))
    assert np.all(res.counts <= N)
    assert res.total <= D * N
    assert np.all(res.counts >= 1)


def test_exhausted_top_arm_is_returned():
    # a huge stop ratio disables the count rule, so only exhaustion can end the run
    vals = np.random.default_rng(2).random((3, 12)) + np.array([[0.0], [0.3], [0.6]])
    pop = ArrayPopulation(vals)
    for compiled in (True, False):
        p = pop if compiled else lazy_copy(pop)
        res = lil_ucb(p, LilUcbConfig(lam=1e9, ranges=np.ptp(vals, axis=1)),
                      np.random.default_rng(0))
        assert res.counts[res.winner] == 12


@given(st.integers(0, 2**32 - 1), st.floats(-100, 100))
def test_shift_invariance(seed, c):
    vals = np.random.default_rng(seed).random((4, 200)) + np.linspace(0, 0.2, 4)[:, None]
    a = lil_ucb(ArrayPopulation(vals), LilUcbConfig(), np.random.default_rng(seed))
    b = lil_ucb(ArrayPopulation(vals + c), LilUcbConfig(scale=np.ptp(vals, axis=1) / 2),
                np.random.default_rng(seed))
    assert a.winner == b.winner
    assert a.counts.tolist() == b.counts.tolist()


def test_unequal_sizes_run_in_python(rng):
    pop = RaggedPopulation([rng.random(10), rng.random(25) + 0.5, rng.random(3)])
    res = lil_ucb(pop, LilUcbConfig(), rng)
    assert np.all(res.counts <= pop.sizes)
    with pytest.raises(ValueError):
        lil_ucb(pop, LilUcbConfig(), rng, compiled=True)


def test_lazy_population_needs_bounds(rng):
    pop = FunctionPopulation([5, 5], lambda i, idx: idx * 1.0)
    with pytest.raises(UnavailableBoundError):
        lil_ucb(pop, LilUcbConfig(), rng)


@pytest.mark.parametrize("kw", [dict(delta=0), dict(delta=1), dict(eps=-1), dict(beta=0),
                                dict(lam=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        LilUcbConfig(**kw)


def test_heuristic_stop_ratio():
    assert LilUcbConfig().stop_ratio(10) == 2.0
    assert LilUcbConfig(lam=3.0).stop_ratio(10) == 3.0


def test_clear_winner_found_early(rng):
    vals = rng.random((5, 5000)) * 1e-3 + np.array([0, 0, 0, 0, 1.0])[:, None]
    pop = ArrayPopulation(vals)
    res = lil_ucb(pop, LilUcbConfig(), rng)
    assert res.winner == exact_argmax(pop) == 4
    assert res.total < 0.1 * pop.values.size
