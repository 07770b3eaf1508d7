import io
import math
import time

import numpy as np
import pytest
from scipy.stats import norm

from bandit_sampling import bnormal
from bandit_sampling.bnormal import (
    BNormalTable,
    b_simple,
    crossing_prob,
    default_table,
    interpolate_table,
    marginal_variance,
    propagate_density,
    proportions_from_first,
    simulate_crossing,
    solve_b,
    solve_b_first,
    walk_params,
)
from bandit_sampling.rewards import build_schedule


def test_walk_params_direct_values():
    s = build_schedule(10, 1)  # proportions 0.1, 0.2, 0.4, 0.8, 1.0
    a, b, _ = walk_params(s, 2)
    assert a == pytest.approx(4 / 9, rel=1e-14)
    assert b == pytest.approx(5 / 9, rel=1e-14)


@pytest.mark.parametrize("t", [0, 1, 7])
def test_walk_params_range(t):
    with pytest.raises(ValueError):
        walk_params(build_schedule(10, 1), t)


@pytest.mark.parametrize("N,m1", [(1000, 50), (10_000, 3), (777, 10)])
def test_composed_transitions_give_marginal_variance(N, m1):
    # independent oracle: compose the Gaussian transitions of the unscaled walk
    s = build_schedule(N, m1)
    var = 1.0 / m1 * (1 - (m1 - 1) / (N - 1))
    for t in range(2, s.horizon + 1):
        a, _, step_var = walk_params(s, t)
        var = a * a * var + step_var
        T = s.cumulative[t - 1]
        assert var == pytest.approx((1 / T) * (1 - (T - 1) / (N - 1)), rel=1e-9, abs=1e-15)
    assert var == pytest.approx(0.0, abs=1e-15)
    assert marginal_variance(s, s.horizon) == 0.0


@pytest.mark.parametrize("t", range(1, 9))
def test_propagated_density_keeps_unit_variance(t):
    s = build_schedule(10_000, 50)
    z, f = propagate_density(s, t)
    dz = z[1] - z[0]
    assert (f.sum() * dz) == pytest.approx(1.0, rel=1e-6)
    assert (z * z * f).sum() * dz == pytest.approx(1.0, rel=1e-6)


def test_crossing_prob_limits():
    props = proportions_from_first(1e-2)
    assert crossing_prob(math.inf, props) == 0.0
    assert crossing_prob(40.0, props) < 1e-300
    assert crossing_prob(0.0, props) >= 0.5


@pytest.mark.parametrize("B", [0.0, 0.5, 1.7, 3.2])
def test_single_tested_step_is_gaussian_tail(B):
    assert crossing_prob(B, np.array([0.5, 1.0])) == pytest.approx(norm.sf(B), rel=1e-12)
    assert crossing_prob(B, np.array([0.5, 1.0]), two_sided=False) == pytest.approx(norm.sf(B))


def _mc_walk(B, schedule, n, rng):
    # unscaled running-mean walk driven by the transition coefficients
    N = schedule.N
    var = 1.0 / schedule.m1 * (1 - (schedule.m1 - 1) / (N - 1))
    x = rng.standard_normal(n) * math.sqrt(var)
    out = np.abs(x) > B * math.sqrt(var)
    for t in range(2, schedule.horizon):
        a, _, step_var = walk_params(schedule, t)
        x = a * x + math.sqrt(step_var) * rng.standard_normal(n)
        T = schedule.cumulative[t - 1]
        out |= np.abs(x) > B * math.sqrt((1 / T) * (1 - (T - 1) / (N - 1)))
    p = 0.5 * out.mean()
    return p, math.sqrt(p * (1 - p) / n) / math.sqrt(2)


@pytest.mark.parametrize("B", [0.7, 2.0])
def test_crossing_prob_matches_monte_carlo(B):
    s = build_schedule(100_000, 1000)
    grid = crossing_prob(B, s)
    p, se = _mc_walk(B, s, 1_000_000, np.random.default_rng(11))
    assert abs(grid - p) < 3 * se
    p2, se2 = simulate_crossing(B, s, 400_000, np.random.default_rng(12))
    assert abs(grid - p2) < 3 * se2


@pytest.mark.parametrize("pi1", [5e-5, 5e-4, 1e-2])
def test_crossing_prob_decreases_in_b(pi1):
    # below B ~ 1 the probability sits within 1e-4 of 1/2, under grid resolution
    props = proportions_from_first(pi1)
    vals = [crossing_prob(b, props) for b in np.linspace(1.0, 5.5, 60)]
    assert np.all(np.diff(vals) < 0)


@pytest.mark.parametrize("delta,pi1,expected", [(1e-6, 5e-5, 5.27250), (5e-2, 1e-2, 2.34862)])
def test_solve_b_reference_values(delta, pi1, expected):
    assert solve_b_first(delta, pi1) == pytest.approx(expected, abs=0.02)


@pytest.mark.parametrize("delta", [1e-6, 1e-3, 0.05, 0.25, 0.49])
def test_solve_b_inverts_crossing_prob(delta):
    props = proportions_from_first(1e-3)
    assert crossing_prob(solve_b(delta, props), props) == pytest.approx(delta, abs=1e-3)


def test_solve_b_decreasing_in_delta():
    props = proportions_from_first(1e-2)
    vals = [solve_b(d, props) for d in (1e-5, 1e-4, 1e-3, 0.01, 0.1, 0.3, 0.49)]
    assert np.all(np.diff(vals) < 0)


def test_solve_b_under_one_second():
    bnormal._solve_cached.cache_clear()
    for d, p in [(1e-6, 5e-5), (0.2, 1e-3), (0.49, 1e-2)]:
        start = time.perf_counter()
        solve_b_first(d, p)
        assert time.perf_counter() - start < 1.0


def test_solve_b_argument_checks():
    props = proportions_from_first(1e-2)
    for bad in (0.0, -0.1, 0.6):
        with pytest.raises(ValueError):
            solve_b(bad, props)
    with pytest.warns(UserWarning):
        solve_b(1e-8, props)
    assert solve_b(0.1, np.array([1.0])) == 0.0


def test_b_simple_values():
    assert b_simple(0.5, 2) == pytest.approx(0.0, abs=1e-15)
    assert b_simple(0.025 * 4, 5) == pytest.approx(1.959964, abs=1e-6)
    assert b_simple(0.05, 1) == 0.0


@pytest.mark.parametrize("delta", [1e-5, 1e-3, 0.01, 0.1, 0.3])
def test_b_simple_is_looser(delta):
    s = build_schedule(10_000, 50)
    assert b_simple(delta, s.horizon) >= solve_b(delta, s)


def test_table_on_node_is_exact():
    table = default_table()
    for i, j in [(0, 0), (10, 3), (22, 5), (38, 2)]:
        assert interpolate_table(table, table.deltas[i], table.proportions[j]) == pytest.approx(
            table.values[i, j], rel=1e-12)


def test_table_midpoint_is_bracketed():
    value = interpolate_table(default_table(), math.sqrt(3e-2 * 5e-2), 1e-2)
    assert 2.34862 < value < 2.55058


def test_table_interpolation_close_to_solver():
    rng = np.random.default_rng(0)
    table = default_table()
    for _ in range(20):
        d = math.exp(rng.uniform(math.log(1e-6), math.log(0.4)))
        p = math.exp(rng.uniform(math.log(5e-5), math.log(1e-2)))
        assert abs(interpolate_table(table, d, p) - solve_b_first(d, p)) < 0.05


def test_table_outside_hull_falls_back_to_solver():
    assert interpolate_table(default_table(), 0.05, 0.02) == pytest.approx(solve_b_first(0.05, 0.02))


def test_bundled_table_matches_fresh_solves():
    table = default_table()
    for i, j in [(0, 0), (22, 0), (15, 4), (38, 5)]:
        assert table.values[i, j] == pytest.approx(
            solve_b_first(table.deltas[i], table.proportions[j]), abs=1e-5)


def test_table_columns_decrease():
    assert np.all(np.diff(default_table().values, axis=0) < 0)


def test_table_csv_round_trip():
    t = BNormalTable.generate(deltas=(0.01, 0.1), proportions=(1e-3, 1e-2))
    buf = io.StringIO()
    t.to_csv(buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "delta,1.0e-03,1.0e-02"
    assert text.splitlines()[1].startswith("1.0e-02,")
    back = BNormalTable.from_csv(io.StringIO(text))
    np.testing.assert_allclose(back.values, t.values, atol=5e-6)
