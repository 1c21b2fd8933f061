"""Regression function, sample Bayes error and separation-based bounds.

``eta(x) = P(y=+1 | x) - P(y=-1 | x) = tanh(LLR(x) / 2)`` where ``LLR`` is the
log-likelihood ratio of the two class-conditional laws (equal priors). For
the GMM with noise variance ``1/d`` this is ``tanh(d mu <theta, x>)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from scipy.linalg import solve_triangular

from . import kernels
from .kernels import Dataset, KernelSpec
from .linalg import CholFactor, loo_distances_from_factor
from .seeding import trial_rng

__all__ = [
    "eta_star",
    "bayes_error",
    "lemma5_bound",
    "Lemma5Report",
    "lemma5_monte_carlo",
    "BayesBoundReport",
    "bayes_bound_check",
    "tsybakov_bound",
    "lemma6_prob",
    "tv_estimate_gmm",
    "gmm_tv_tail",
    "SeparationReport",
    "separation_report",
]


def _points(X):
    if isinstance(X, Dataset):
        X = X.X
    return np.atleast_2d(np.asarray(X, dtype=np.float64))


def _noise_logpdf(model, e):
    if model.noise == "rademacher":
        return np.where(np.isclose(np.abs(e), 1.0, rtol=0, atol=1e-9), 0.0, -np.inf)
    scale = math.sqrt((model.dof - 2.0) / model.dof)
    return stats.t.logpdf(e, model.dof, scale=scale)


def eta_star(model, X):
    """Regression function of ``model`` at the rows of ``X``."""
    X = _points(X)
    if model.kind == "gmm":
        d = X.shape[1]
        theta = model.theta(d)
        return np.tanh(d * model.mu * (X @ theta))
    if model.kind != "mixture":
        raise ValueError(f"unsupported model kind {model.kind!r}")
    lam = model.eigenvalues()
    U = model.basis()
    theta = model.theta()
    W = X if U is None else X @ U
    t = theta if U is None else U.T @ theta
    if model.noise == "gaussian":
        return np.tanh(model.mu * (W @ (t / lam)))
    sd = np.sqrt(lam)
    lp = _noise_logpdf(model, (W - model.mu * t) / sd).sum(axis=1)
    lm = _noise_logpdf(model, (W + model.mu * t) / sd).sum(axis=1)
    if np.any(np.isneginf(lp) & np.isneginf(lm)):
        raise ValueError("point has zero likelihood under both classes")
    with np.errstate(invalid="ignore"):
        llr = lp - lm
    return np.tanh(llr / 2.0)


def bayes_error(model, X):
    """Sample Bayes error ``mean(1 - eta(x_i)^2)``."""
    eta = eta_star(model, X)
    if eta.size == 0:
        raise ValueError("empty sample")
    return float(np.mean(1.0 - eta * eta))


def lemma5_bound(eta_norm_cap, r_n_sq, X, model):
    """``cap^2 + sum_i (1 - eta(x_i)^2) / r_n^2``.

    Bounds the conditional expectation of the interpolant's squared norm
    given the design, assuming ``|eta|_K <= eta_norm_cap``.
    """
    if not r_n_sq > 0:
        raise ValueError("r_n_sq must be positive")
    eta = eta_star(model, X)
    return float(eta_norm_cap) ** 2 + float(np.sum(1.0 - eta * eta)) / r_n_sq


def _redraw_labels(eta, redraws, rng):
    u = rng.random((eta.shape[0], redraws))
    return np.where(u < (1.0 + eta[:, None]) / 2.0, 1.0, -1.0)


def _design_factor(kernel, X):
    K = kernels.gram(kernel, X)
    f = CholFactor.from_matrix(K)
    return K, f.R


@dataclass
class Lemma5Report:
    mean_norm_sq: float
    se: float
    bound: float
    r_n_sq: float
    cap: float
    redraws: int

    @property
    def holds(self):
        return self.mean_norm_sq <= self.bound + 2.0 * self.se


def lemma5_monte_carlo(model, X, eta_norm_cap, redraws, seed, kernel=None):
    """Average ``|f_{S_n}|^2`` over label redraws ``y_i ~ eta(x_i)`` with ``X`` fixed."""
    X = _points(X)
    kernel = kernel or KernelSpec.linear()
    _, R = _design_factor(kernel, X)
    r_sq = float(np.min(loo_distances_from_factor(R)) ** 2)
    eta = eta_star(model, X)
    Y = _redraw_labels(eta, redraws, trial_rng(seed, 0))
    Z = solve_triangular(R, Y, trans="T", lower=False)
    norms = np.sum(Z * Z, axis=0)
    se = norms.std(ddof=1) / math.sqrt(redraws) if redraws > 1 else 0.0
    bound = lemma5_bound(eta_norm_cap, r_sq, X, model)
    return Lemma5Report(float(norms.mean()), float(se), bound, r_sq, float(eta_norm_cap), redraws)


@dataclass
class BayesBoundReport:
    """Average online mistake rate given the design versus its bound."""

    mistake_rate: float
    se: float
    bound: float
    R_n_sq: float
    r_n_sq: float
    bayes_error: float

    @property
    def holds(self):
        return self.mistake_rate <= self.bound + 2.0 * self.se


def bayes_bound_check(model, X, eta_norm_cap, redraws, seed, kernel=None):
    """Check ``(1/n) sum_i P[y_i f_{S_{i-1}}(x_i) <= 0 | X]`` against
    ``(R^2 / r^2) E(X) + R^2 cap^2 / n`` by redrawing labels.

    The online predictions come from the strictly upper part of ``R``:
    ``f_{S_{i-1}}(x_i) = sum_{j<i} R[j, i] z_j``.
    """
    X = _points(X)
    n = X.shape[0]
    kernel = kernel or KernelSpec.linear()
    K, R = _design_factor(kernel, X)
    R_sq = float(np.max(np.diag(K)))
    r_sq = float(np.min(loo_distances_from_factor(R)) ** 2)
    eta = eta_star(model, X)
    Y = _redraw_labels(eta, redraws, trial_rng(seed, 1))
    Z = solve_triangular(R, Y, trans="T", lower=False)
    pred = np.triu(R, 1).T @ Z
    rates = np.mean(Y * pred <= 0, axis=0)
    e = float(np.mean(1.0 - eta * eta))
    bound = R_sq / r_sq * e + R_sq * float(eta_norm_cap) ** 2 / n
    se = rates.std(ddof=1) / math.sqrt(redraws) if redraws > 1 else 0.0
    return BayesBoundReport(float(rates.mean()), float(se), bound, R_sq, r_sq, e)


def tsybakov_bound(alpha, C0):
    """Expected Bayes error bound ``C0 * 2(1 - alpha) / (2 - alpha)``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha == 1.0:
        return 0.0
    return C0 * 2.0 * (1.0 - alpha) / (2.0 - alpha)


def lemma6_prob(tv, n, epsilon):
    """Lower bound on ``P[E(X) <= 4 epsilon]``; may be negative (vacuous)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0.0 <= tv <= 1.0:
        raise ValueError("tv must lie in [0, 1]")
    return 1.0 - (1.0 / epsilon + 1.0) / 2.0 * n * (1.0 - tv)


def tv_estimate_gmm(mu, d):
    """Exact total variation between ``N(+mu theta, I/d)`` and ``N(-mu theta, I/d)``.

    Reduces to one dimension along ``theta``: ``2 Phi(mu sqrt(d)) - 1``.
    """
    if mu < 0 or d < 1:
        raise ValueError("need mu >= 0 and d >= 1")
    return float(special.erf(mu * math.sqrt(d) / math.sqrt(2.0)))


def gmm_tv_tail(mu, d):
    """Exponential upper bound ``exp(-d mu^2 / 2)`` on ``1 - d_TV`` for the GMM."""
    return math.exp(-d * mu * mu / 2.0)


@dataclass
class SeparationReport:
    bayes_error: float
    tv_lower: float
    lemma5_bound: float
    lemma6_prob: float
    epsilon: float
    tv_tail_bound: float = math.nan

    def as_row(self):
        return dict(self.__dict__)


def separation_report(model, X, r_n_sq, eta_norm_cap, epsilon=None):
    """Bundle the separation quantities for a GMM sample ``X``.

    ``epsilon`` defaults to ``1/n``.
    """
    X = _points(X)
    n = X.shape[0]
    eps = 1.0 / n if epsilon is None else float(epsilon)
    if model.kind == "gmm":
        d = X.shape[1]
        tv = tv_estimate_gmm(model.mu, d)
        tail = gmm_tv_tail(model.mu, d)
    else:
        raise ValueError("total variation is only available in closed form for the GMM")
    return SeparationReport(
        bayes_error=bayes_error(model, X),
        tv_lower=tv,
        lemma5_bound=lemma5_bound(eta_norm_cap, r_n_sq, X, model),
        lemma6_prob=lemma6_prob(tv, n, eps),
        epsilon=eps,
        tv_tail_bound=tail,
    )
