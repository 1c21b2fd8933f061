"""Synthetic two-class mixture models and their norm-growth bounds.

Two families are provided:

* :class:`GMMSpec` -- ``x = y * mu * theta + eps`` with ``eps ~ N(0, I/d)``
  and ``d = ceil(psi * n)`` (or a fixed ``d``).
* :class:`MixtureSpec` -- ``phi = y * mu * theta + Sigma^{1/2} eps`` with
  i.i.d. unit-variance noise coordinates and ``Sigma`` given by its spectrum.

Labels are Rademacher in both cases.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.stats import ortho_group

from . import kernels
from .interpolator import online_fit
from .kernels import Dataset, KernelSpec
from .linalg import RankDeficientError, loo_distances
from .seeding import trial_rng

__all__ = [
    "GMMSpec",
    "MixtureSpec",
    "power_law_spectrum",
    "model_from_dict",
    "sample",
    "gmm_norm_bound",
    "gmm_mistake_bound",
    "gamma_p",
    "general_cov_bound",
    "Region",
    "region_classify",
    "region_grid",
    "NormGrowthTrace",
    "norm_growth_experiment",
    "RnLowerReport",
    "r_n_lower_check",
]

NOISE_KINDS = ("gaussian", "rademacher", "student_t")


def _unit_theta(theta, dim):
    if theta is None or (isinstance(theta, str) and theta == "e1"):
        out = np.zeros(dim)
        out[0] = 1.0
        return out
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != dim:
        raise ValueError(f"theta_star has length {theta.shape[0]}, expected {dim}")
    if abs(np.linalg.norm(theta) - 1.0) > 1e-8:
        raise ValueError("theta_star must be a unit vector")
    return theta


@dataclass(frozen=True)
class GMMSpec:
    """Over-parametrized Gaussian mixture.

    Exactly one of ``psi`` (``d = ceil(psi * n)``) and ``d`` is used; a fixed
    ``d`` takes precedence. ``theta_star=None`` means ``e_1``.
    """

    mu: float
    psi: Optional[float] = 2.0
    d: Optional[int] = None
    theta_star: Optional[tuple] = None
    kind: str = field(default="gmm", init=False)

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.d is None:
            if self.psi is None or not self.psi > 1:
                raise ValueError("psi must be > 1 when d is not fixed")
        elif self.d < 1:
            raise ValueError("d must be positive")
        if self.theta_star is not None and not isinstance(self.theta_star, str):
            object.__setattr__(self, "theta_star", tuple(float(t) for t in self.theta_star))
            if self.d is not None:
                _unit_theta(self.theta_star, self.d)

    def dim(self, n):
        return int(self.d) if self.d is not None else int(math.ceil(self.psi * n))

    def theta(self, dim):
        return _unit_theta(self.theta_star, dim)

    def to_dict(self):
        out = {"kind": "gmm", "mu": self.mu}
        if self.d is not None:
            out["d"] = self.d
        else:
            out["psi"] = self.psi
        if self.theta_star is not None:
            out["theta_star"] = list(self.theta_star) if not isinstance(self.theta_star, str) else self.theta_star
        return out


def power_law_spectrum(p, alpha):
    """``lambda_i = i ** -alpha`` for ``i = 1..p``."""
    return np.arange(1, p + 1, dtype=np.float64) ** (-float(alpha))


@dataclass(frozen=True)
class MixtureSpec:
    """General mixture with covariance spectrum and non-Gaussian noise.

    ``spectrum`` is either an explicit non-increasing positive sequence of
    length ``p`` or ``None`` together with ``alpha`` (power law ``i^-alpha``;
    ``alpha = 0`` is the flat spectrum). ``rotate=True`` replaces the standard
    basis by a Haar-random orthogonal basis drawn from ``rotation_seed``.
    """

    mu: float
    p: int
    alpha: float = 0.0
    spectrum: Optional[tuple] = None
    noise: str = "gaussian"
    dof: float = 10.0
    theta_star: Optional[tuple] = None
    rotate: bool = False
    rotation_seed: int = 0
    kind: str = field(default="mixture", init=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise {self.noise!r}, expected one of {NOISE_KINDS}")
        if self.noise == "student_t" and not self.dof > 2:
            raise ValueError("student_t noise needs dof > 2 for unit variance")
        if self.spectrum is not None:
            spec = np.asarray(self.spectrum, dtype=np.float64)
            if spec.shape != (self.p,):
                raise ValueError("spectrum must have length p")
            if np.any(spec <= 0) or np.any(np.diff(spec) > 0):
                raise ValueError("spectrum must be positive and non-increasing")
            object.__setattr__(self, "spectrum", tuple(spec.tolist()))
        elif self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.theta_star is not None and not isinstance(self.theta_star, str):
            object.__setattr__(self, "theta_star", tuple(float(t) for t in self.theta_star))
            _unit_theta(self.theta_star, self.p)

    def eigenvalues(self):
        if self.spectrum is not None:
            return np.asarray(self.spectrum)
        return power_law_spectrum(self.p, self.alpha)

    def theta(self, dim=None):
        return _unit_theta(self.theta_star, self.p)

    def basis(self):
        if not self.rotate:
            return None
        return ortho_group.rvs(self.p, random_state=self.rotation_seed)

    def sigma_quadratic(self, v):
        """``v^T Sigma v``."""
        lam = self.eigenvalues()
        U = self.basis()
        w = v if U is None else U.T @ v
        return float(np.sum(lam * w * w))

    @property
    def moment(self):
        """Moment order ``m`` of the noise (``inf`` for sub-Gaussian)."""
        return float(self.dof) if self.noise == "student_t" else math.inf

    def to_dict(self):
        out = {"kind": "mixture", "mu": self.mu, "p": self.p, "noise": self.noise}
        if self.spectrum is not None:
            out["spectrum"] = list(self.spectrum)
        else:
            out["alpha"] = self.alpha
        if self.noise == "student_t":
            out["dof"] = self.dof
        if self.theta_star is not None:
            out["theta_star"] = list(self.theta_star) if not isinstance(self.theta_star, str) else self.theta_star
        if self.rotate:
            out["rotate"] = True
            out["rotation_seed"] = self.rotation_seed
        return out


def model_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", "gmm")
    if kind == "gmm":
        return GMMSpec(**d)
    if kind == "mixture":
        return MixtureSpec(**d)
    raise ValueError(f"unknown model kind {kind!r}")


def _noise(model, rng, shape):
    if model.noise == "gaussian":
        return rng.standard_normal(shape)
    if model.noise == "rademacher":
        return rng.integers(0, 2, size=shape) * 2.0 - 1.0
    t = rng.standard_t(model.dof, size=shape)
    return t * math.sqrt((model.dof - 2.0) / model.dof)


def sample(model, n, rng, dim=None):
    """Draw ``n`` i.i.d. labelled points from ``model``.

    For the GMM ``dim`` overrides ``ceil(psi * n)``, e.g. to draw test points
    in the dimension of a training sample of a different size.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    y = rng.integers(0, 2, size=n) * 2.0 - 1.0
    if model.kind == "gmm":
        d = model.dim(n) if dim is None else int(dim)
        theta = model.theta(d)
        X = (y * model.mu)[:, None] * theta[None, :] + rng.standard_normal((n, d)) / math.sqrt(d)
        return Dataset(X, y, meta={"d": d})
    theta = model.theta()
    E = _noise(model, rng, (n, model.p))
    lam_sqrt = np.sqrt(model.eigenvalues())
    U = model.basis()
    if U is None:
        noise = E * lam_sqrt
    else:
        noise = ((E @ U) * lam_sqrt) @ U.T
    X = (y * model.mu)[:, None] * theta[None, :] + noise
    return Dataset(X, y, meta={"d": model.p})


def gmm_norm_bound(mu, psi):
    """Limiting norm bound ``psi / ((psi - 1) mu^2)``."""
    if not psi > 1:
        raise ValueError("psi must be > 1")
    if not mu > 0:
        raise ValueError("mu must be > 0")
    return psi / ((psi - 1.0) * mu * mu)


def gmm_mistake_bound(mu, psi):
    """Almost-sure mistake bound ``(mu + 1)^2 psi / ((psi - 1) mu^2)``."""
    return (mu + 1.0) ** 2 * gmm_norm_bound(mu, psi)


def gamma_p(p, m=math.inf):
    """``p^(1/2 + 2/m) (log p)^0.51``; ``m = inf`` drops the ``2/m`` term."""
    if p <= 0:
        raise ValueError("p must be positive")
    expo = 0.5 if math.isinf(m) else 0.5 + 2.0 / m
    return p ** expo * math.log(p) ** 0.51


def general_cov_bound(model, n, lam=0.0, c1=1.0, c2=1.0, c3=1.0):
    """Right-hand side of the general-mixture regret bound.

    Bounds ``R_n^2 |f_n|^2 / n`` (``lam = 0``) or its ridge analog with
    ``lambda_j(Sigma)`` replaced by ``lambda_j(Sigma) + lam / p``. The
    universal constants default to 1.

    Returns
    -------
    value : float
    components : dict
        The individual factors, for diagnostics.
    """
    p = model.p
    if p <= 0:
        raise ValueError("p must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    ev = model.eigenvalues()
    trace = float(np.sum(ev))
    lam_1 = float(ev[0]) + lam / p
    lam_p = float(ev[-1]) + lam / p
    theta = model.theta()
    t_sigma_t = model.sigma_quadratic(theta)
    g = gamma_p(p, model.moment)
    ratio = n / p
    mu2 = model.mu ** 2
    scale = lam + mu2 + trace + g
    numer = (1.0 / lam_p) * ratio * (1.0 + c2 * t_sigma_t / lam_p * ratio)
    denom = 1.0 + c3 * (mu2 + t_sigma_t) / lam_1 * ratio
    value = float(c1 * scale * numer / denom / n)
    components = {
        "trace": trace,
        "gamma_p": g,
        "lambda_1": lam_1,
        "lambda_p": lam_p,
        "theta_sigma_theta": t_sigma_t,
        "n_over_p": ratio,
        "scale": scale,
        "numerator": numer,
        "denominator": denom,
    }
    components = {k: float(v) for k, v in components.items()}
    return value, components


class Region(str, Enum):
    UNKNOWN = "Unknown"
    DECAYING_RIDGE = "Decaying_Ridge"
    DECAYING_INTERPOLATION = "Decaying_Interpolation"

    @property
    def rank(self):
        return {"Unknown": 0, "Decaying_Ridge": 1, "Decaying_Interpolation": 2}[self.value]


def _interp_cases(x, y, alpha):
    # exponents base n: mu^2 = n^x, p = n^y, p^a = n^(a y)
    yield x >= (1 - alpha) * y and (1 - alpha) * y >= 1 >= alpha * y
    yield x >= (1 - alpha) * y and y >= 1 >= (1 - alpha) * y
    lo = max(y - 1, alpha * y)
    hi = (1 - alpha) * y
    yield lo <= x <= hi and 1 <= hi
    yield lo <= x <= hi and 1 >= hi


def _ridge_cases(x, y, alpha):
    yield x >= y - 1 and alpha * y >= 1
    yield x >= y - 1 and alpha * y >= x


def region_classify(x_exp, y_exp, alpha, allow_ridge=True):
    """Asymptotic regime of the general-mixture bound for a power-law spectrum.

    With ``mu^2 = n^x_exp``, ``p = n^y_exp`` and ``lambda_i = i^-alpha``,
    report whether the interpolation bound decays, whether only a suitably
    regularized ridge bound decays, or neither case analysis applies.
    Boundaries are inclusive.
    """
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if not y_exp > 1:
        raise ValueError("y_exp must be > 1 (over-parametrized)")
    if not x_exp > 0:
        raise ValueError("x_exp must be > 0")
    if any(_interp_cases(x_exp, y_exp, alpha)):
        return Region.DECAYING_INTERPOLATION
    if allow_ridge and any(_ridge_cases(x_exp, y_exp, alpha)):
        return Region.DECAYING_RIDGE
    return Region.UNKNOWN


def region_grid(alpha, x_values, y_values, allow_ridge=True):
    """Classify every ``(x, y)`` pair; returns ``(x, y, alpha, Region)`` tuples."""
    return [
        (float(x), float(y), float(alpha), region_classify(x, y, alpha, allow_ridge))
        for x in x_values
        for y in y_values
    ]


@dataclass
class NormGrowthTrace:
    """Norm and cumulative-mistake statistics over an ``n`` grid.

    Per-trial raw values are kept in ``norm_sq_trials`` and
    ``mistakes_trials`` with shape ``(trials, len(n_values))``. For the GMM
    ``theory_bound`` is the limiting norm bound; for the general mixture it is
    the regret-rate bound of :func:`general_cov_bound` evaluated at each ``n``.
    """

    n_values: np.ndarray
    norm_sq_trials: np.ndarray
    mistakes_trials: np.ndarray
    theory_bound: np.ndarray
    mistake_bound: np.ndarray
    theory_quantity: str = "norm_sq_limit"
    rank_failures: int = 0
    monotone: bool = True

    @property
    def trials(self):
        return self.norm_sq_trials.shape[0]

    def _se(self, a):
        if a.shape[0] < 2:
            return np.full(a.shape[1], np.nan)
        return a.std(axis=0, ddof=1) / math.sqrt(a.shape[0])

    @property
    def norm_sq_mean(self):
        return self.norm_sq_trials.mean(axis=0)

    @property
    def norm_sq_se(self):
        return self._se(self.norm_sq_trials)

    @property
    def mistakes_mean(self):
        return self.mistakes_trials.mean(axis=0)

    @property
    def mistakes_se(self):
        return self._se(self.mistakes_trials)


def _mistake_flags(state, y):
    eps = state.eps
    pred = y - eps
    return y * pred <= 0


def _run_stream(kernel, lam, data):
    state = online_fit(kernel, lam, data)
    flags = _mistake_flags(state, data.y)
    norms = np.cumsum(state.increments)
    return norms, np.cumsum(flags)


def norm_growth_experiment(model, n_grid, trials, seed, kernel=None, lam=0.0, workers=1):
    """Measure ``|f_{S_n}|^2`` and cumulative online mistakes over ``n_grid``.

    For the GMM a fresh stream of length ``n`` (dimension ``ceil(psi n)``) is
    drawn for every ``(trial, n)``. For the general mixture ``p`` is fixed, so
    each trial draws one stream of length ``max(n_grid)`` and reads off the
    prefixes. Trials whose Gram matrix is numerically singular are dropped and
    counted in ``rank_failures``.
    """
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    if n_grid.size == 0 or n_grid[0] < 1:
        raise ValueError("n_grid must contain positive integers")
    if np.any(np.diff(n_grid) <= 0):
        raise ValueError("n_grid must be strictly increasing")
    kernel = kernel or KernelSpec.linear()

    def one_trial(t):
        norms = np.empty(n_grid.size)
        mistakes = np.empty(n_grid.size)
        monotone = True
        try:
            if model.kind == "gmm":
                for j, n in enumerate(n_grid):
                    data = sample(model, int(n), trial_rng(seed, t, j))
                    nrm, mis = _run_stream(kernel, lam, data)
                    monotone &= bool(np.all(np.diff(nrm) >= 0))
                    norms[j], mistakes[j] = nrm[-1], mis[-1]
            else:
                data = sample(model, int(n_grid[-1]), trial_rng(seed, t))
                nrm, mis = _run_stream(kernel, lam, data)
                monotone &= bool(np.all(np.diff(nrm) >= 0))
                norms[:], mistakes[:] = nrm[n_grid - 1], mis[n_grid - 1]
        except RankDeficientError:
            return None
        return norms, mistakes, monotone

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one_trial, range(trials)))
    else:
        results = [one_trial(t) for t in range(trials)]
    kept = [r for r in results if r is not None]
    norm_tr = np.array([r[0] for r in kept]).reshape(len(kept), n_grid.size)
    mis_tr = np.array([r[1] for r in kept]).reshape(len(kept), n_grid.size)

    if model.kind == "gmm":
        psi = model.psi if model.d is None else model.d / n_grid
        if model.mu > 0 and np.all(np.asarray(psi) > 1):
            theory = np.broadcast_to(gmm_norm_bound(model.mu, psi), n_grid.shape).astype(float)
            mbound = np.broadcast_to(gmm_mistake_bound(model.mu, psi), n_grid.shape).astype(float)
        else:
            theory = np.full(n_grid.shape, np.inf)
            mbound = np.full(n_grid.shape, np.inf)
        quantity = "norm_sq_limit"
    else:
        theory = np.array([general_cov_bound(model, int(n), lam)[0] for n in n_grid])
        mbound = theory * n_grid
        quantity = "regret_rate_bound"
    return NormGrowthTrace(
        n_values=n_grid,
        norm_sq_trials=norm_tr,
        mistakes_trials=mis_tr,
        theory_bound=theory,
        mistake_bound=mbound,
        theory_quantity=quantity,
        rank_failures=len(results) - len(kept),
        monotone=all(r[2] for r in kept),
    )


@dataclass
class RnLowerReport:
    """Empirical ``r_n^2`` against the lower bound ``(mu^2+1) / (1 + C n)``.

    ``c_hat`` is the implied constant ``((mu^2+1)/r_n^2 - 1)/n`` computed from
    the trial-mean ``r_n^2``. ``bounded`` asks that it not grow by more than
    ``factor`` between the smallest and largest ``n``.
    """

    n_values: np.ndarray
    r_sq_trials: np.ndarray
    R_sq_trials: np.ndarray
    c_hat: np.ndarray
    factor: float = 3.0

    @property
    def r_sq_mean(self):
        return self.r_sq_trials.mean(axis=0)

    @property
    def R_sq_mean(self):
        return self.R_sq_trials.mean(axis=0)

    @property
    def c_ratio(self):
        """``c_hat`` at the largest ``n`` over ``c_hat`` at the smallest."""
        return float(self.c_hat[-1] / self.c_hat[0])

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.c_hat)) and np.max(self.c_hat) <= self.factor * self.c_hat[0])


def r_n_lower_check(model, n_grid, trials, seed, factor=3.0):
    """Measure the minimum leave-one-out distance ``r_n^2`` on GMM samples."""
    if model.kind != "gmm":
        raise ValueError("r_n_lower_check is defined for the Gaussian mixture")
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    r_sq = np.empty((trials, n_grid.size))
    R_sq = np.empty((trials, n_grid.size))
    for t in range(trials):
        for j, n in enumerate(n_grid):
            data = sample(model, int(n), trial_rng(seed, t, j))
            K = kernels.gram(KernelSpec.linear(), data.X)
            r_sq[t, j] = np.min(loo_distances(K)) ** 2
            R_sq[t, j] = np.max(np.diag(K))
    mu2p1 = model.mu ** 2 + 1.0
    c_hat = (mu2p1 / r_sq.mean(axis=0) - 1.0) / n_grid
    return RnLowerReport(n_grid, r_sq, R_sq, c_hat, factor)
