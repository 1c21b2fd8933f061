"""
Bayes error and separation
==========================

When the classes barely overlap the regression function is close to +-1 at
every sample point, the sample Bayes error is tiny and the conditional norm
of the interpolant is controlled by the norm of the regression function.

That norm is not computable here (``tanh`` of a linear form is not in the
linear-kernel RKHS), so it enters as an assumed cap ``B = 5``. The conditional
bound can fail for intermediate ``mu`` where that assumption is too small.
"""

from mnic import GMMSpec, sample
from mnic.seeding import trial_rng
from mnic.separation import (
    bayes_bound_check,
    bayes_error,
    gmm_tv_tail,
    lemma5_monte_carlo,
    separation_report,
    tv_estimate_gmm,
)

for mu, d in ((0.02, 300), (0.05, 300), (0.1, 300), (1.0, 300)):
    model = GMMSpec(mu=mu, d=d)
    X = sample(model, 100, trial_rng(5, d)).X
    l5 = lemma5_monte_carlo(model, X, 5.0, 200, seed=6)
    bb = bayes_bound_check(model, X, 5.0, 200, seed=6)
    rep = separation_report(model, X, l5.r_n_sq, 5.0)
    print(
        f"mu={mu:4.2f} d={d}: E(X) {bayes_error(model, X):.4f}  tv {tv_estimate_gmm(mu, d):.4f}"
        f" (1-tv <= {gmm_tv_tail(mu, d):.2e})  P[E<=4/n] >= {rep.lemma6_prob:8.2f}"
    )
    print(f"      cond. norm^2 {l5.mean_norm_sq:.3f} vs {l5.bound:.3f} (holds={l5.holds});"
          f" online mistake rate {bb.mistake_rate:.3f} vs {bb.bound:.3f}")
