"""Regret instrumentation and Monte Carlo generalization estimates.

:func:`build_report` turns the step log of an online run into the quantities
of the deterministic mistake bound

    r_n^2 B_n^2 <= sum_i eps_i^2 <= R_n^2 B_n^2,    #mistakes <= R_n^2 B_n^2

where ``B_n^2 = y^T (K + lam I)^{-1} y``, ``R_n^2`` is the largest diagonal
entry of ``K + lam I`` and ``r_n`` the smallest leave-one-out distance.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import kernels
from .genmodels import sample
from .interpolator import fit_batch, polyak_predictor, prefix_predictions
from .kernels import Dataset, KernelSpec
from .linalg import RankDeficientError, loo_distances_from_factor
from .seeding import trial_rng

__all__ = [
    "RegretReport",
    "build_report",
    "MarkovReport",
    "markov_chain_check",
    "GeneralizationEstimate",
    "estimate_generalization",
    "BOUND_RTOL",
]

BOUND_RTOL = 1e-6


def _mistakes(y, eps):
    # prediction before seeing the point is y - eps; a zero prediction counts
    pred = y - eps
    return int(np.sum(y * pred <= 0))


@dataclass
class RegretReport:
    n: int
    lam: float
    sq_loss: float
    mistakes: int
    R_n_sq: float
    r_n_sq: float
    norm_sq_final: float
    per_step: list = field(repr=False, default_factory=list)

    @property
    def lower_bound(self):
        return self.r_n_sq * self.norm_sq_final

    @property
    def upper_bound(self):
        return self.R_n_sq * self.norm_sq_final

    def checks(self, rtol=BOUND_RTOL):
        """Each inequality of the mistake bound with relative slack ``rtol``."""
        lo, sq, up = self.lower_bound, self.sq_loss, self.upper_bound
        return {
            "lower": lo <= sq + rtol * max(1.0, abs(sq)),
            "upper": sq <= up + rtol * max(1.0, abs(up)),
            "mistakes": self.mistakes <= up + rtol * max(1.0, abs(up)),
            "mistakes_le_sq_loss": self.mistakes <= sq + 1e-6,
        }

    def holds(self, rtol=BOUND_RTOL):
        return all(self.checks(rtol).values())

    def as_row(self):
        return {
            "n": self.n,
            "lam": self.lam,
            "sq_loss": self.sq_loss,
            "mistakes": self.mistakes,
            "R_n_sq": self.R_n_sq,
            "r_n_sq": self.r_n_sq,
            "norm_sq_final": self.norm_sq_final,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
        }


def build_report(state, data=None):
    """Assemble a :class:`RegretReport` from an online-fitted state.

    ``data``, when given, must be the stream the state was fitted on; it is
    only used to cross-check the labels.
    """
    if state.n == 0:
        raise ValueError("empty state")
    if len(state.step_log) != state.n:
        raise ValueError("state has no complete step log; fit it with online_step")
    y = state.y
    if data is not None:
        kept = np.setdiff1d(np.arange(data.n), state.skipped)
        if not np.array_equal(np.asarray(data.y)[kept], y):
            raise ValueError("data does not match the fitted stream")
    eps = state.eps
    K = state.gram()
    R_sq = float(np.max(np.diag(K))) + state.lam
    r_sq = float(np.min(loo_distances_from_factor(state.R)) ** 2)
    return RegretReport(
        n=state.n,
        lam=state.lam,
        sq_loss=float(eps @ eps),
        mistakes=_mistakes(y, eps),
        R_n_sq=R_sq,
        r_n_sq=r_sq,
        norm_sq_final=float(state.norm_sq),
        per_step=list(state.step_log),
    )


@dataclass
class MarkovReport:
    """Per-predictor check of ``P[y f <= 0] <= E[(1 - y f)^2]`` on held-out data."""

    p_hat: np.ndarray
    e_hat: np.ndarray
    se: np.ndarray

    @property
    def holds(self):
        return self.p_hat <= self.e_hat + 2.0 * self.se

    @property
    def all_hold(self):
        return bool(np.all(self.holds))


def markov_chain_check(predictions, y_test):
    """Compare misclassification rate with mean squared margin loss.

    ``predictions`` has shape ``(k, m)`` (one row per predictor, e.g. per
    prefix ``i``) or ``(m,)``; ``y_test`` has shape ``(m,)``. The standard
    error is that of the per-sample difference of the two sides.
    """
    pred = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    y = np.asarray(y_test, dtype=np.float64)
    m = y.shape[0]
    if m == 0:
        raise ValueError("empty test set")
    margin = y[None, :] * pred
    miss = (margin <= 0).astype(float)
    sq = (1.0 - margin) ** 2
    diff = miss - sq
    se = diff.std(axis=1, ddof=1) / math.sqrt(m) if m > 1 else np.zeros(pred.shape[0])
    return MarkovReport(miss.mean(axis=1), sq.mean(axis=1), se)


def _mean_se(a):
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] < 2:
        return a.mean(axis=0), np.zeros(a.shape[1:]) if a.ndim > 1 else 0.0
    return a.mean(axis=0), a.std(axis=0, ddof=1) / math.sqrt(a.shape[0])


@dataclass
class GeneralizationEstimate:
    """Monte Carlo estimates of held-out risks against the expected bound.

    All arrays are indexed like ``n_grid``. ``bound`` is the trial mean of
    ``R_n^2 B_n^2 / n``; ``polyak_bound`` that of
    ``R_{n+1}^2 B_{n+1}^2 / (n+1)``. ``min_risk_index`` is the prefix length
    attaining ``est_min_risk``.
    """

    trials: int
    n_grid: np.ndarray
    est_min_risk: np.ndarray
    se_min_risk: np.ndarray
    min_risk_index: np.ndarray
    est_final_risk: np.ndarray
    se_final_risk: np.ndarray
    est_polyak_risk: np.ndarray
    se_polyak_risk: np.ndarray
    bound: np.ndarray
    se_bound: np.ndarray
    polyak_bound: np.ndarray
    se_polyak_bound: np.ndarray
    markov: List[MarkovReport] = field(repr=False, default_factory=list)
    rank_failures: int = 0

    def final_holds(self):
        return self.est_final_risk <= self.bound + 2.0 * np.hypot(self.se_final_risk, self.se_bound)

    def polyak_holds(self):
        return self.est_polyak_risk <= self.polyak_bound + 2.0 * np.hypot(self.se_polyak_risk, self.se_polyak_bound)

    def min_holds(self):
        return self.est_min_risk <= self.bound + 2.0 * np.hypot(self.se_min_risk, self.se_bound)


def _complexity(state):
    K_diag_max = float(np.max(np.diag(state.gram()))) + state.lam
    return K_diag_max * state.norm_sq


def _generalization_trial(model, kernel, lam, n_grid, test_size, seed, t):
    out = []
    for j, n in enumerate(n_grid):
        rng = trial_rng(seed, t, j)
        dim = model.dim(n) if model.kind == "gmm" else None
        full = sample(model, n + 1 + test_size, rng, dim=dim)
        train = Dataset(full.X[:n], full.y[:n])
        train1 = Dataset(full.X[: n + 1], full.y[: n + 1])
        X_test, y_test = full.X[n + 1 :], full.y[n + 1 :]
        state = fit_batch(kernel, lam, train)
        prefix = prefix_predictions(state, X_test)
        margins = y_test[None, :] * prefix
        risk_strict = np.mean(margins < 0, axis=1)
        final_risk = float(np.mean(margins[-1] <= 0))
        polyak = polyak_predictor(state)(X_test)
        polyak_risk = float(np.mean(y_test * polyak <= 0))
        rb = _complexity(state) / n
        rb1 = _complexity(fit_batch(kernel, lam, train1)) / (n + 1)
        out.append((risk_strict, final_risk, polyak_risk, rb, rb1, prefix, y_test))
    return out


def estimate_generalization(
    model, kernel, lam, n_grid, trials, test_size, seed, workers=1, strict=False
):
    """Estimate held-out risks of prefix, final and Polyak-averaged solutions.

    Each trial draws ``n + 1`` training points and ``test_size`` fresh test
    points from ``model`` for every ``n`` in ``n_grid``, using an RNG derived
    from ``(seed, trial, grid index)``. Trials hitting a rank-deficient Gram
    matrix raise in strict mode and are discarded otherwise.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if test_size < 1:
        raise ValueError("test_size must be >= 1; risks are undefined on an empty test set")
    n_grid = [int(n) for n in n_grid]
    if not n_grid or n_grid[0] < 1 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing positive integers")
    kernel = kernel or KernelSpec.linear()

    def run(t):
        try:
            return _generalization_trial(model, kernel, lam, n_grid, test_size, seed, t)
        except RankDeficientError:
            if strict:
                raise
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(trials)))
    else:
        results = [run(t) for t in range(trials)]
    kept = [r for r in results if r is not None]
    if not kept:
        raise RankDeficientError(0.0, msg="every trial was rank deficient")

    G = len(n_grid)
    fields = {k: np.empty(G) for k in (
        "min", "se_min", "final", "se_final", "polyak", "se_polyak",
        "bound", "se_bound", "pbound", "se_pbound")}
    argmin = np.empty(G, dtype=int)
    markov = []
    for j, n in enumerate(n_grid):
        per = [r[j] for r in kept]
        risks, risks_se = _mean_se(np.array([p[0] for p in per]))
        i_min = int(np.argmin(risks))
        argmin[j] = i_min + 1
        fields["min"][j], fields["se_min"][j] = risks[i_min], risks_se[i_min]
        fields["final"][j], fields["se_final"][j] = _mean_se([p[1] for p in per])
        fields["polyak"][j], fields["se_polyak"][j] = _mean_se([p[2] for p in per])
        fields["bound"][j], fields["se_bound"][j] = _mean_se([p[3] for p in per])
        fields["pbound"][j], fields["se_pbound"][j] = _mean_se([p[4] for p in per])
        markov.append(markov_chain_check(
            np.concatenate([p[5] for p in per], axis=1),
            np.concatenate([p[6] for p in per]),
        ))
    return GeneralizationEstimate(
        trials=len(kept),
        n_grid=np.asarray(n_grid),
        est_min_risk=fields["min"],
        se_min_risk=fields["se_min"],
        min_risk_index=argmin,
        est_final_risk=fields["final"],
        se_final_risk=fields["se_final"],
        est_polyak_risk=fields["polyak"],
        se_polyak_risk=fields["se_polyak"],
        bound=fields["bound"],
        se_bound=fields["se_bound"],
        polyak_bound=fields["pbound"],
        se_polyak_bound=fields["se_pbound"],
        markov=markov,
        rank_failures=len(results) - len(kept),
    )
