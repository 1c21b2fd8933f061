"""
Norm of the interpolant on a Gaussian mixture
=============================================

With ``d = ceil(psi n)`` features and mean separation ``mu``, the squared norm
of the interpolant settles near ``psi / ((psi - 1) mu^2)`` and the number of
online mistakes stays below ``(mu + 1)^2`` times that. With ``mu = 0`` there is
nothing to separate and the norm grows with ``n``.
"""

import numpy as np

from mnic import GMMSpec, norm_growth_experiment
from mnic.genmodels import r_n_lower_check

grid = [50, 100, 200, 400]
for mu in (1.0, 2.0):
    tr = norm_growth_experiment(GMMSpec(mu=mu, psi=2.0), grid, trials=10, seed=1)
    print(f"mu={mu}: limit {tr.theory_bound[0]:.3f}, mistake bound {tr.mistake_bound[0]:.2f}")
    for n, m, se, k in zip(grid, tr.norm_sq_mean, tr.norm_sq_se, tr.mistakes_mean):
        print(f"   n={n:4d}  norm^2 {m:.4f} +- {se:.4f}   mistakes {k:.1f}")

tr0 = norm_growth_experiment(GMMSpec(mu=0.0, psi=2.0), grid, trials=3, seed=1)
print("mu=0 norm^2:", np.round(tr0.norm_sq_mean, 1))

# %%
# The smallest leave-one-out distance does not shrink with n here, so the
# fitted constant in the lower bound ``(mu^2+1)/(1 + C n)`` falls like 1/n.
rep = r_n_lower_check(GMMSpec(mu=2.0, psi=2.0), grid, trials=5, seed=2)
print("r_n^2:", np.round(rep.r_sq_mean, 3), " C_hat:", np.round(rep.c_hat, 4))
