"""Subsampled Metropolis-Hastings on the mean of Gaussian data.

The accept test becomes a two-arm race, so most proposals are decided from a
small subset of the data. Each decision is checked against the full-data test.

    python3 demos/subsampled_mh.py
"""
import numpy as np

from bandit_sampling import SamplerSpec, mh_accept

N, STEPS = 5000, 3000
rng = np.random.default_rng(0)
data = rng.normal(1.0, 2.0, N)


def loglik(theta, idx):
    return -0.5 * ((data[idx] - theta) / 2.0) ** 2


def flat(*_):
    return 0.0


spec = SamplerSpec("racing-normal", delta=0.01)
theta, step = data.mean(), 2.0 / np.sqrt(N)
chain, agree = [], 0
for _ in range(STEPS):
    proposal = theta + step * rng.standard_normal()
    u = 1.0 - rng.random()
    accept = mh_accept(theta, proposal, flat, flat, loglik, N, u, spec, rng)
    exact = np.log(u) < loglik(proposal, np.arange(N)).sum() - loglik(theta, np.arange(N)).sum()
    agree += accept == exact
    if accept:
        theta = proposal
    chain.append(theta)

chain = np.array(chain[STEPS // 5:])
print(f"posterior mean {chain.mean():.4f} (exact {data.mean():.4f})")
print(f"posterior sd   {chain.std():.4f} (exact {2.0 / np.sqrt(N):.4f})")
print(f"decisions matching the full-data test: {agree / STEPS:.2%}")
