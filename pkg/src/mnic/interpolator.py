"""Minimum-norm interpolation and ridge least squares, batch and online.

The fitted function is ``f(x) = sum_j dual[j] k(x_j, x)`` with no intercept.
With ``lam = 0`` it is the minimum-norm interpolant of the labels; with
``lam > 0`` it is the kernel ridge solution ``dual = (K + lam I)^{-1} y``.

The online path keeps the Cholesky factor ``R`` of ``K + lam I`` together with
``z = R^{-T} y``. Each new point contributes one new coordinate
``z_i = eps_i / s_i``, so the complexity ``y^T (K + lam I)^{-1} y = |z|^2``
grows by exactly ``eps_i^2 / s_i^2``.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .kernels import Dataset, KernelSpec
from .linalg import DEFAULT_RTOL, CholFactor, RankDeficientError, polyak_dual, rank_tol

__all__ = [
    "StepRecord",
    "InterpolatorState",
    "FeatureState",
    "PolyakPredictor",
    "fit_batch",
    "online_step",
    "online_fit",
    "predict",
    "online_step_features",
    "polyak_predictor",
    "prefix_predictions",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepRecord:
    index: int
    eps: float
    s_sq: float
    increment: float


class _Rows:
    """Append-only row buffer."""

    def __init__(self, dim=None):
        self._buf = None
        self.n = 0
        self.dim = dim

    def append(self, x):
        if self._buf is None:
            self.dim = x.shape[0]
            self._buf = np.empty((16, self.dim))
        elif x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {x.shape[0]}")
        if self.n == self._buf.shape[0]:
            self._buf = np.concatenate([self._buf, np.empty_like(self._buf)])
        self._buf[self.n] = x
        self.n += 1

    @property
    def array(self):
        if self._buf is None:
            return np.zeros((0, self.dim or 0))
        return self._buf[: self.n]


@dataclass
class InterpolatorState:
    """Growing solver state for one data stream.

    ``norm_sq`` is ``y^T (K + lam I)^{-1} y``; for ``lam = 0`` it is the squared
    RKHS norm of the interpolant. ``step_log`` holds one :class:`StepRecord`
    per accepted online step and is empty after :func:`fit_batch`.
    """

    kernel: KernelSpec
    lam: float = 0.0
    strict: bool = True
    rtol: float = DEFAULT_RTOL
    chol: CholFactor = None
    z: np.ndarray = None
    dual: np.ndarray = None
    norm_sq: float = 0.0
    step_log: List[StepRecord] = field(default_factory=list)
    skipped: List[int] = field(default_factory=list)
    seen: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.chol is None:
            self.chol = CholFactor(rtol=self.rtol)
        if self.z is None:
            self.z = np.zeros(0)
        if self.dual is None:
            self.dual = np.zeros(0)
        self._X = _Rows(self.kernel.input_dim)
        self._y = []

    @property
    def n(self):
        return self.chol.n

    @property
    def X(self):
        return self._X.array

    @property
    def y(self):
        return np.asarray(self._y, dtype=np.float64)

    @property
    def R(self):
        return self.chol.R

    def gram(self):
        """Kernel matrix of the stored points (without ``lam``)."""
        if self.n == 0:
            return np.zeros((0, 0))
        return kernels.gram(self.kernel, self.X)

    def rkhs_norm_sq(self):
        """``dual^T K dual``, the squared RKHS norm of the fitted function."""
        if self.n == 0:
            return 0.0
        return float(self.dual @ self.gram() @ self.dual)

    def __call__(self, X):
        return predict(self, X)

    @property
    def eps(self):
        return np.array([r.eps for r in self.step_log])

    @property
    def s_sq(self):
        return np.array([r.s_sq for r in self.step_log])

    @property
    def increments(self):
        return np.array([r.increment for r in self.step_log])


def _check_lam(lam):
    lam = float(lam)
    if not lam >= 0:
        raise ValueError("lam must be nonnegative")
    return lam


def fit_batch(kernel, lam, data, strict=True, rtol=DEFAULT_RTOL):
    """Solve ``(K + lam I) dual = y`` in one shot.

    Raises :class:`RankDeficientError` when ``K + lam I`` is numerically
    singular (only possible for ``lam = 0``).
    """
    lam = _check_lam(lam)
    state = InterpolatorState(kernel, lam, strict=strict, rtol=rtol)
    if data.n == 0:
        return state
    K = kernels.gram(kernel, data.X) + lam * np.eye(data.n)
    state.chol = CholFactor.from_matrix(K, rtol=rtol)
    R = state.chol.R
    state.z = solve_triangular(R, data.y, trans="T", lower=False)
    state.dual = solve_triangular(R, state.z, lower=False)
    state.norm_sq = float(state.z @ state.z)
    for x, y in data:
        state._X.append(x)
        state._y.append(float(y))
    state.seen = data.n
    return state


def predict(state, x):
    """Evaluate the fitted function at one point or at each row of a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if state.n == 0:
        return 0.0 if single else np.zeros(np.atleast_2d(x).shape[0])
    k = kernels.cross_gram(state.kernel, state.X, x)
    out = state.dual @ k
    return float(out) if single else out


def online_step(state, x, y):
    """Feed one labelled point to the online solver.

    Returns ``(state, eps)`` where ``eps = y - f_prev(x)`` is the prediction
    error of the solution fitted on the points seen so far. The state is
    updated in place. In lenient mode a point lying in the span of the stored
    ones is skipped with a warning and the state is left unchanged.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = float(y)
    index = state.seen
    state.seen += 1
    eps = y - predict(state, x)
    k_new = kernels.cross_gram(state.kernel, state.X, x)
    k_diag = kernels.eval(state.kernel, x, x) + state.lam
    r, s_sq = state.chol.schur(k_new, k_diag)
    if s_sq < rank_tol(k_diag, state.rtol):
        if state.strict:
            raise RankDeficientError(s_sq, index)
        log.warning("skipping point %d: in span of previous points (s^2=%.3e)", index, s_sq)
        state.skipped.append(index)
        return state, eps
    s = state.chol.append(k_new, k_diag)
    state._X.append(x)
    state._y.append(y)
    z_new = eps / s
    state.z = np.append(state.z, z_new)
    state.dual = solve_triangular(state.chol.R, state.z, lower=False, check_finite=False)
    inc = z_new * z_new
    state.norm_sq += inc
    state.step_log.append(StepRecord(index, eps, s * s, inc))
    return state, eps


def online_fit(kernel, lam, data, strict=True, rtol=DEFAULT_RTOL):
    """Run :func:`online_step` over a whole dataset."""
    state = InterpolatorState(kernel, _check_lam(lam), strict=strict, rtol=rtol)
    for x, y in data:
        online_step(state, x, y)
    return state


@dataclass
class FeatureState:
    """Feature-space form of the online interpolator (finite ``p``).

    ``Q`` holds an orthonormal basis of the span of the feature rows seen so
    far, one basis vector per column.
    """

    p: int
    beta: np.ndarray = None
    Q: np.ndarray = None
    rows: np.ndarray = None
    eps: List[float] = field(default_factory=list)
    rtol: float = DEFAULT_RTOL

    def __post_init__(self):
        if self.beta is None:
            self.beta = np.zeros(self.p)
        if self.Q is None:
            self.Q = np.zeros((self.p, 0))
        if self.rows is None:
            self.rows = np.zeros((0, self.p))

    def predict(self, phi):
        return np.asarray(phi, dtype=np.float64) @ self.beta


def online_step_features(state, phi, y):
    """One step of the online update in feature space.

    ``beta += eps / |P phi|^2 * P phi`` with ``P`` the projection orthogonal to
    the previous feature rows, computed by Gram-Schmidt with one
    reorthogonalization pass.
    """
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if phi.shape[0] != state.p:
        raise ValueError(f"expected feature dimension {state.p}, got {phi.shape[0]}")
    eps = float(y) - float(phi @ state.beta)
    v = phi - state.Q @ (state.Q.T @ phi)
    v -= state.Q @ (state.Q.T @ v)
    ns = float(v @ v)
    if ns < rank_tol(phi @ phi, state.rtol):
        raise RankDeficientError(ns, state.rows.shape[0])
    state.beta = state.beta + (eps / ns) * v
    state.Q = np.column_stack([state.Q, v / np.sqrt(ns)])
    state.rows = np.vstack([state.rows, phi])
    state.eps.append(eps)
    return state


@dataclass
class PolyakPredictor:
    """Average of the prefix solutions, ``(1/n) sum_i f_{S_i}``."""

    kernel: KernelSpec
    X: np.ndarray
    dual: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = kernels.cross_gram(self.kernel, self.X, x)
        out = self.dual @ k
        return float(out) if x.ndim == 1 else out


def polyak_predictor(state, y=None):
    """Polyak-averaged predictor ``c = R^{-1} D R^{-T} y`` from a fitted state."""
    if state.n == 0:
        raise ValueError("polyak average needs at least one fitted point")
    y = state.y if y is None else np.asarray(y, dtype=np.float64)
    return PolyakPredictor(state.kernel, state.X.copy(), polyak_dual(state.R, y, "average"))


def prefix_predictions(state, X):
    """Predictions of every prefix solution at the rows of ``X``.

    Returns an ``(n, m)`` array whose row ``i`` holds ``f_{S_{i+1}}(X)``.
    Uses ``f_{S_k}(x) = sum_{i<=k} z_i (R^{-T} k_x)_i``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if state.n == 0:
        return np.zeros((0, X.shape[0]))
    Kx = kernels.cross_gram(state.kernel, state.X, X)
    W = solve_triangular(state.R, Kx, trans="T", lower=False)
    return np.cumsum(state.z[:, None] * W, axis=0)
