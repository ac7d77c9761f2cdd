"""
Checking the incoherence and eigenvalue assumptions
===================================================

The consistency theory asks that, per node, irrelevant features are not too
correlated with relevant ones (incoherence, measured by ``alpha_slack``) and
that the information matrix on the true support is well conditioned
(``delta_min``). Both can be estimated from data or by Monte Carlo.
"""

import numpy as np

from covising.model import ModelDims
from covising.simulate import SimConfig, sample_dataset, simulate_dataset
from covising.theory import assumption_report, empirical_info, population_info_mc

for beta in (0.5, 4.0):
    _, truth = simulate_dataset(SimConfig(ModelDims(q=5, p=3), n=10, n_E=5, rho=0.5, beta=beta, seed=2))
    theta = truth.theta_star
    rng = np.random.default_rng(0)
    print(f"beta = {beta}")
    for j in range(theta.q):
        info = population_info_mc(theta, j, 20_000, rng)
        rep = assumption_report(theta, info)
        print(f"  node {j}: |support|={len(rep.support):2d} alpha_slack={rep.alpha_slack:8.3f} "
              f"delta_min={rep.delta_min:.2e}")

# Every node intercept is +-beta in the simulation design, so for large beta
# the logistic weights p(1 - p) collapse towards zero and delta_min with them.

# The empirical information of a large sample approaches the population one.
data = sample_dataset(truth, 20_000, np.random.default_rng(1), sweeps=100)
emp = empirical_info(data, theta, 0)
pop = population_info_mc(theta, 0, 100_000, np.random.default_rng(2))
print("max |I_n - I*| / max |I*| =", np.max(np.abs(emp.I - pop.I)) / np.max(np.abs(pop.I)))
