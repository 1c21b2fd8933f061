"""
General mixtures and the regime map
===================================

Power-law covariance spectra with heavy-tailed noise. The regret-rate bound
is evaluated with its universal constants set to one, so only its scaling in
``n`` is meaningful. The regime map classifies exponent pairs ``mu^2 = n^x``,
``p = n^y`` by which bound decays.
"""

import numpy as np

from mnic import MixtureSpec, norm_growth_experiment
from mnic.genmodels import general_cov_bound, region_grid

model = MixtureSpec(mu=4.0, p=400, alpha=0.3, noise="student_t", dof=8)
tr = norm_growth_experiment(model, [25, 50, 100, 200], trials=5, seed=4)
for n, m, b in zip(tr.n_values, tr.norm_sq_mean, tr.theory_bound):
    print(f"n={n:4d}  norm^2 {m:8.3f}   bound on R^2 B^2 / n {b:.3e}")

# %%
# Flat spectrum, mean growing with p: the bound halves when n doubles.
p = 10 ** 6
flat = MixtureSpec(mu=np.sqrt(p), p=p)
v1, comp = general_cov_bound(flat, 1000)
v2, _ = general_cov_bound(flat, 2000)
print("bound(2000) / bound(1000) =", round(v2 / v1, 4))
print("components:", {k: round(float(v), 4) for k, v in comp.items()})

# %%
# A coarse text rendering of the regime map (I interpolation, R ridge, . unknown).
xs = np.linspace(0.1, 3.0, 30)
ys = np.linspace(1.05, 3.0, 12)
cells = {(x, y): r for x, y, _, r in region_grid(0.3, xs, ys)}
sym = {"Decaying_Interpolation": "I", "Decaying_Ridge": "R", "Unknown": "."}
for y in ys[::-1]:
    print(f"y={y:4.2f} " + "".join(sym[cells[(x, y)].value] for x in xs))
print("       x from 0.1 to 3.0")
