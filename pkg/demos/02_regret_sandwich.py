"""
Squared-loss regret and mistakes
================================

The cumulative squared residual of the online interpolant is pinned between
``r_n^2 B_n^2`` and ``R_n^2 B_n^2``, where ``B_n^2`` is the final squared norm,
``R_n^2`` the largest kernel diagonal and ``r_n^2`` the smallest
leave-one-out distance. Mistakes are bounded by the squared loss.
"""

from mnic import GMMSpec, KernelSpec, build_report, online_fit, sample
from mnic.seeding import trial_rng

model = GMMSpec(mu=2.0, psi=2.0)
for n in (25, 50, 100, 200):
    data = sample(model, n, trial_rng(7, n))
    rep = build_report(online_fit(KernelSpec.linear(), 0.0, data), data)
    print(
        f"n={n:4d}  {rep.lower_bound:7.3f} <= sq_loss {rep.sq_loss:7.3f} <= {rep.upper_bound:7.3f}"
        f"   mistakes {rep.mistakes}   holds={rep.holds()}"
    )
