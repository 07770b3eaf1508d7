"""Draw from a 10-state target with and without subsampling and compare costs.

    python3 demos/approximate_sampling.py
"""
import numpy as np

from bandit_sampling import FactorOracle, SamplerSpec, approx_sample
from bandit_sampling.bench import SyntheticSpec, synth_gen, total_variation

D, N, DRAWS = 10, 10_000, 3000

population, target = synth_gen(SyntheticSpec(D=D, N=N, dist="normal", sigma=1e-4, seed=0))
oracle = FactorOracle.from_arrays(population.values)

print(f"target p(X): {np.round(target, 3)}")
for algorithm in ("exact", "racing-normal", "racing-ebs", "lil-ucb"):
    spec = SamplerSpec(algorithm, delta=0.05)
    rng = np.random.default_rng(1)
    counts = np.zeros(D)
    used = 0
    for _ in range(DRAWS):
        out = approx_sample(oracle, spec, rng, full_output=True)
        counts[out.winner] += 1
        used += out.total
    print(f"{algorithm:14s} TV to target {total_variation(counts / DRAWS, target):.4f}  "
          f"rewards per draw {used / DRAWS:9.1f} of {D * N}")
