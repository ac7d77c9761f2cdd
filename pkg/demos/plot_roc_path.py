"""
Regularization paths and ROC curves
===================================

A penalty path traces support recovery from the empty model to a dense one.
Scoring each point against the truth gives an ROC curve; a validation set
picks one operating point on it.
"""

import numpy as np

from covising.evaluate import simulate_roc, tp_at_fp
from covising.model import ModelDims
from covising.simulate import SimConfig

sim = SimConfig(ModelDims(q=8, p=5), n=200, n_E=8, rho=0.4, beta=2.0, seed=3)

for mode in ("separate-max", "joint"):
    out = simulate_roc(sim, mode, n_lambda=30, validation=True)
    star = out["star"]
    print(f"{mode:>12}: AUC {out['auc']:.3f}; validation picks lambda={out['lam_star']:.4f} "
          f"(sensitivity {star.sensitivity:.2f}, 1-specificity {star.one_minus_specificity:.3f})")

# Counts rather than rates are easier to compare when the number of zeros
# changes, for example after appending uninformative covariates.
for p_noise in (0, 20):
    sim_noise = SimConfig(ModelDims(8, 5), 200, 8, 0.4, 2.0, seed=3, p_noise=p_noise)
    curve = simulate_roc(sim_noise, "separate-max", n_lambda=30)["curve"]
    print(f"p_noise={p_noise:2d}: true positives at 20 false positives = {tp_at_fp(curve, 20):.1f}")

# The curve itself, ready for plotting
fpr, tpr = out["curve"].arrays()
print(np.column_stack([fpr, tpr])[::6].round(3))
