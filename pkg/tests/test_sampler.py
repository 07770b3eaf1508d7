import numpy as np
import pytest
from toys import GaussianMeanToy, PairGibbsToy

from bandit_sampling import (
    FactorOracle,
    SamplerSpec,
    approx_sample,
    exact_sample_cdf,
    gibbs_step,
    mh_accept,
)
from bandit_sampling.bench import SyntheticSpec, synth_gen, total_variation
from bandit_sampling.sampler import mh_population, solve


def empirical(draws, D):
    return np.bincount(draws, minlength=D) / len(draws)


def target_oracle(D=10, N=500, sigma=0.05, seed=0):
    pop, p = synth_gen(SyntheticSpec(D, N, "normal", sigma, seed=seed))
    return FactorOracle.from_arrays(pop.values), p


def test_exact_spec_matches_inverse_cdf_sampler():
    oracle, p = target_oracle()
    rng = np.random.default_rng(3)
    n = 50_000
    gumbel = [approx_sample(oracle, SamplerSpec("exact"), rng) for _ in range(n)]
    cdf = [exact_sample_cdf(p, 1.0 - u) for u in rng.random(n)]
    assert total_variation(empirical(gumbel, 10), empirical(cdf, 10)) < 0.02
    assert total_variation(empirical(gumbel, 10), p) < 0.02


def test_single_state_needs_no_rewards(rng):
    oracle = FactorOracle.from_arrays(np.zeros((1, 5)))
    out = approx_sample(oracle, SamplerSpec("racing-normal"), rng, full_output=True)
    assert out.winner == 0 and out.total == 0


@pytest.mark.parametrize("algorithm", ["racing-normal", "racing-ebs", "lil-ucb", "exact"])
def test_same_seed_same_draws(algorithm):
    oracle, _ = target_oracle(N=300)
    spec = SamplerSpec(algorithm, delta=0.1)
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(99)
        runs.append([approx_sample(oracle, spec, rng, full_output=True) for _ in range(30)])
    for a, b in zip(*runs):
        assert a.winner == b.winner
        np.testing.assert_array_equal(a.eps, b.eps)
        np.testing.assert_array_equal(a.counts, b.counts)


def test_fixed_gumbel_noise_isolates_subsampling():
    oracle, _ = target_oracle(N=300)
    eps = np.random.default_rng(1).gumbel(size=10)
    spec = SamplerSpec("racing-normal", delta=0.1)
    outs = [approx_sample(oracle, spec, np.random.default_rng(s), eps=eps, full_output=True)
            for s in range(5)]
    for out in outs:
        np.testing.assert_array_equal(out.eps, eps)
    np.testing.assert_array_equal(outs[0].population.values, outs[1].population.values)
    assert len({tuple(o.counts) for o in outs}) > 1


def test_gumbel_stream_does_not_depend_on_algorithm():
    oracle, _ = target_oracle(N=300)
    a = approx_sample(oracle, SamplerSpec("exact"), np.random.default_rng(4), full_output=True)
    b = approx_sample(oracle, SamplerSpec("lil-ucb"), np.random.default_rng(4), full_output=True)
    np.testing.assert_array_equal(a.eps, b.eps)


def test_rewards_never_exceed_population(rng):
    oracle, _ = target_oracle(N=200, sigma=1.0)
    for algorithm in ("racing-normal", "racing-ebs", "lil-ucb"):
        for _ in range(10):
            out = approx_sample(oracle, SamplerSpec(algorithm, delta=0.05), rng, full_output=True)
            assert np.all(out.counts <= 200)


def test_unknown_algorithm_and_bad_delta():
    with pytest.raises(ValueError):
        SamplerSpec("thompson")
    with pytest.raises(ValueError):
        SamplerSpec("racing-normal", delta=1.0)
    SamplerSpec("exact", delta=0.0)


def test_unequal_factor_counts_race_independently(rng):
    rows = [np.full(40, 0.01), np.full(80, 0.0), np.full(120, -0.01)]
    oracle = FactorOracle.from_arrays(rows)
    spec = SamplerSpec("racing-normal", delta=0.05)
    assert spec.racing_config(approx_sample(oracle, spec, rng, full_output=True).population).variance == "independent"
    draws = [approx_sample(oracle, spec, rng) for _ in range(4000)]
    assert total_variation(empirical(draws, 3), oracle.probabilities()) < 0.05


def test_distribution_level_error_bound():
    oracle, p = target_oracle(D=10, N=1000, sigma=0.2, seed=5)
    rng = np.random.default_rng(6)
    spec = SamplerSpec("racing-normal", delta=0.05)
    draws = [approx_sample(oracle, spec, rng) for _ in range(50_000)]
    assert total_variation(empirical(draws, 10), p) <= 0.05 + 0.02


# --- Metropolis-Hastings reduction ---------------------------------------


def test_self_proposal_with_u_below_one_accepts(rng):
    toy = GaussianMeanToy(N=200)
    for spec in (SamplerSpec("exact"), SamplerSpec("racing-normal", delta=0.05)):
        assert mh_accept(0.3, 0.3, toy.log_prior, toy.log_proposal, toy.loglik, 200, 0.5, spec, rng)


def test_self_proposal_gap_equals_log_u_over_n():
    toy = GaussianMeanToy(N=200)
    pop = mh_population(0.3, 0.3, toy.log_prior, toy.log_proposal, toy.loglik, 200, 0.25)
    means = pop.arm_means()
    assert means[1] - means[0] == pytest.approx(-np.log(0.25) / 200, rel=1e-9)


@pytest.mark.parametrize("u", [0.0, -0.1, 1.5])
def test_u_outside_unit_interval_rejected(u, rng):
    toy = GaussianMeanToy(N=50)
    with pytest.raises(ValueError):
        mh_accept(0.0, 0.1, toy.log_prior, toy.log_proposal, toy.loglik, 50, u,
                  SamplerSpec("exact"), rng)


def test_exhausted_decision_equals_exact_mh():
    toy = GaussianMeanToy(N=20, step_scale=2.0)
    rng = np.random.default_rng(8)
    spec = SamplerSpec("racing-normal", delta=0.05, m1=20)  # one batch covers everything
    for _ in range(300):
        cur, prop = rng.normal(0.5, 0.3, 2)
        u = 1.0 - rng.random()
        pop = mh_population(cur, prop, toy.log_prior, toy.log_proposal, toy.loglik, 20, u)
        winner, counts = solve(pop, spec, rng)
        assert counts.tolist() == [20, 20]
        assert (winner == 1) == toy.exact_accept(cur, prop, u)


def test_asymmetric_proposal_enters_the_base_terms():
    toy = GaussianMeanToy(N=100)
    pop = mh_population(0.0, 0.2, lambda t: -t, lambda a, b: 3.0 * a, toy.loglik, 100, 1.0)
    plain = mh_population(0.0, 0.2, toy.log_prior, toy.log_proposal, toy.loglik, 100, 1.0)
    shift = (pop.arm_means() - plain.arm_means()) * 100
    np.testing.assert_allclose(shift, [0.0 + 3.0 * 0.2, -0.2 + 0.0], atol=1e-12)


def test_small_delta_decisions_match_exact_mh():
    toy = GaussianMeanToy(N=1000)
    assert toy.compare(SamplerSpec("racing-normal", delta=1e-4), 3000) >= 0.999


# --- Gibbs helper -----------------------------------------------------------


def test_gibbs_step_symmetric_pair_is_uniform():
    oracle = FactorOracle.from_arrays(np.tile(np.linspace(-1, 1, 50), (2, 1)))
    rng = np.random.default_rng(11)
    draws = [gibbs_step(lambda s: oracle, None, SamplerSpec("racing-normal", delta=0.05), rng)
             for _ in range(10_000)]
    assert abs(np.mean(draws) - 0.5) <= 0.03


def test_gibbs_chain_exact_spec_reaches_joint():
    toy = PairGibbsToy()
    freq = toy.run(SamplerSpec("exact"), 20_000, seed=1)
    assert total_variation(freq, toy.joint) < 0.02


def test_gibbs_chain_racing_tracks_exact_chain():
    toy = PairGibbsToy()
    exact = toy.run(SamplerSpec("exact"), 5000, seed=2)
    racing = toy.run(SamplerSpec("racing-normal", delta=0.01), 5000, seed=2)
    assert total_variation(exact, racing) < 0.05
