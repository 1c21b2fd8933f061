"""Minimum-norm interpolating and ridge least-squares classification.

Batch and online solvers sharing one Cholesky factor, instrumentation for the
deterministic mistake bound, synthetic mixture models and separation bounds.
"""

from .kernels import Dataset, KernelSpec, cross_gram, gram
from .linalg import CholFactor, RankDeficientError, loo_distances, polyak_dual, qr_coefficients
from .interpolator import (
    FeatureState,
    InterpolatorState,
    fit_batch,
    online_fit,
    online_step,
    online_step_features,
    polyak_predictor,
    predict,
    prefix_predictions,
)
from .regret import build_report, estimate_generalization, markov_chain_check
from .genmodels import (
    GMMSpec,
    MixtureSpec,
    Region,
    general_cov_bound,
    gmm_mistake_bound,
    gmm_norm_bound,
    norm_growth_experiment,
    r_n_lower_check,
    region_classify,
    region_grid,
    sample,
)
from .separation import (
    bayes_error,
    lemma5_bound,
    lemma5_monte_carlo,
    lemma6_prob,
    tsybakov_bound,
    tv_estimate_gmm,
)

__version__ = "0.1.0"
