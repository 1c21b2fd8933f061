"""Growing Cholesky factors, projection distances and QR-form coefficients.

The kernel matrix of a growing sample is factored as ``K = R^T R`` with ``R``
upper triangular. Appending a point adds one column to ``R``; the new diagonal
entry is the distance from the new embedding to the span of the previous ones.
"""

import numpy as np
from scipy.linalg import cholesky, solve_triangular

__all__ = [
    "RankDeficientError",
    "CholFactor",
    "chol_append",
    "chol_solve",
    "loo_distances",
    "loo_distances_from_factor",
    "qr_coefficients",
    "polyak_weights",
    "polyak_dual",
    "dense_solve",
    "rank_tol",
]

DEFAULT_RTOL = 1e-10


class RankDeficientError(ValueError):
    """Raised when a squared projection distance falls below the rank tolerance.

    Attributes
    ----------
    s_sq : float
        The offending squared distance (Schur complement).
    index : int or None
        Position of the point in the stream, when known.
    """

    def __init__(self, s_sq, index=None, msg=None):
        self.s_sq = float(s_sq)
        self.index = index
        if msg is None:
            where = "" if index is None else f" at point {index}"
            msg = f"point lies in the span of previous points{where} (s^2 = {self.s_sq:.3e})"
        super().__init__(msg)


def rank_tol(k_diag, rtol=DEFAULT_RTOL):
    return rtol * max(1.0, float(k_diag))


class CholFactor:
    """Upper-triangular Cholesky factor of a growing symmetric PD matrix.

    ``R`` is stored in an over-allocated buffer so appends are amortized
    ``O(n^2)`` (dominated by the triangular solve).
    """

    def __init__(self, R=None, rtol=DEFAULT_RTOL):
        self.rtol = rtol
        if R is None:
            self._buf = np.zeros((8, 8))
            self.n = 0
        else:
            R = np.array(R, dtype=np.float64, ndmin=2)
            n = R.shape[0]
            if R.shape != (n, n):
                raise ValueError("R must be square")
            self._buf = np.zeros((max(8, n), max(8, n)))
            self._buf[:n, :n] = np.triu(R)
            self.n = n

    @classmethod
    def from_matrix(cls, K, rtol=DEFAULT_RTOL):
        """One-shot factorization with the same rank policy as :meth:`append`."""
        K = np.asarray(K, dtype=np.float64)
        try:
            R = cholesky(K, lower=False)
        except np.linalg.LinAlgError:
            raise RankDeficientError(0.0, msg="matrix is not positive definite") from None
        piv = np.diag(R) ** 2
        bad = np.flatnonzero(piv < rtol * np.maximum(1.0, np.diag(K)))
        if bad.size:
            raise RankDeficientError(piv[bad[0]], int(bad[0]))
        return cls(R, rtol=rtol)

    @property
    def R(self):
        return self._buf[: self.n, : self.n]

    def copy(self):
        return CholFactor(self.R.copy(), rtol=self.rtol)

    def __len__(self):
        return self.n

    def _grow(self):
        cap = self._buf.shape[0]
        buf = np.zeros((2 * cap, 2 * cap))
        buf[:cap, :cap] = self._buf
        self._buf = buf

    def schur(self, k_new, k_diag):
        """Return ``(r, s_sq)`` with ``r = R^{-T} k_new`` and ``s_sq = k_diag - |r|^2``."""
        k_new = np.asarray(k_new, dtype=np.float64).reshape(-1)
        if k_new.shape[0] != self.n:
            raise ValueError(f"expected {self.n} cross-kernel values, got {k_new.shape[0]}")
        if self.n == 0:
            return k_new, float(k_diag)
        r = solve_triangular(self.R, k_new, trans="T", lower=False, check_finite=False)
        return r, float(k_diag - r @ r)

    def append(self, k_new, k_diag):
        """Append one row/column in place and return the new diagonal entry ``s``.

        Raises :class:`RankDeficientError` (factor unchanged) when the Schur
        complement is below ``rtol * max(1, k_diag)``.
        """
        r, s_sq = self.schur(k_new, k_diag)
        if s_sq < rank_tol(k_diag, self.rtol):
            raise RankDeficientError(s_sq, self.n)
        if self.n == self._buf.shape[0]:
            self._grow()
        n = self.n
        s = np.sqrt(s_sq)
        self._buf[:n, n] = r
        self._buf[n, n] = s
        self.n = n + 1
        return s

    def solve(self, b):
        return chol_solve(self, b)


def chol_append(f, k_new, k_diag):
    """Functional append: returns ``(new_factor, s_new)`` and leaves ``f`` intact."""
    g = f.copy()
    s = g.append(k_new, k_diag)
    return g, s


def chol_solve(f, b):
    """Solve ``K x = b`` given ``K = R^T R``."""
    R = f.R if isinstance(f, CholFactor) else np.asarray(f, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != R.shape[0]:
        raise ValueError(f"size mismatch: factor is {R.shape[0]}, rhs is {b.shape[0]}")
    if R.shape[0] == 0:
        return b.copy()
    w = solve_triangular(R, b, trans="T", lower=False)
    return solve_triangular(R, w, lower=False)


def loo_distances_from_factor(R):
    """Leave-one-out distances from an upper Cholesky factor of ``K``.

    ``(K^{-1})_{ii}`` is the squared norm of row ``i`` of ``R^{-1}``.
    """
    R = np.asarray(R, dtype=np.float64)
    n = R.shape[0]
    Rinv = solve_triangular(R, np.eye(n), lower=False)
    inv_diag = np.einsum("ij,ij->i", Rinv, Rinv)
    return 1.0 / np.sqrt(inv_diag)


def loo_distances(K, rtol=DEFAULT_RTOL):
    """Distance of each embedding to the span of all the others.

    ``s_loo[i] ** 2 == 1 / inv(K)[i, i]``.
    """
    f = CholFactor.from_matrix(K, rtol=rtol)
    return loo_distances_from_factor(f.R)


def qr_coefficients(R, y):
    """``z = R^{-T} y``; the online iterate after ``k`` steps is ``sum_{i<=k} q_i z_i``."""
    R = np.asarray(R, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if R.shape[0] and np.any(np.diag(R) == 0):
        raise np.linalg.LinAlgError("singular triangular factor")
    if R.shape[0] == 0:
        return y.copy()
    return solve_triangular(R, y, trans="T", lower=False)


def polyak_weights(n):
    """Diagonal of ``D``: ``1 - (k-1)/n`` for ``k = 1..n``."""
    return 1.0 - np.arange(n) / n


def polyak_dual(R, y, mode="average"):
    """Dual coefficients of a prefix interpolant or of the Polyak average.

    Parameters
    ----------
    R
        Upper Cholesky factor of the (possibly regularized) kernel matrix.
    y
        Labels.
    mode
        ``"average"`` for ``R^{-1} D R^{-T} y`` or an integer ``k`` for the
        ``k``-th prefix solution ``R^{-1} P_k R^{-T} y`` (padded with zeros).
    """
    R = np.asarray(R, dtype=np.float64)
    n = R.shape[0]
    z = qr_coefficients(R, y)
    if isinstance(mode, str):
        if mode != "average":
            raise ValueError(f"unknown mode {mode!r}")
        w = z * polyak_weights(n)
    else:
        k = int(mode)
        if not 0 <= k <= n:
            raise ValueError(f"prefix length {k} out of range [0, {n}]")
        w = z.copy()
        w[k:] = 0.0
    if n == 0:
        return w
    return solve_triangular(R, w, lower=False)


def dense_solve(A, b):
    """Dense LU solve used as an independent oracle in tests and checks."""
    return np.linalg.solve(np.asarray(A, dtype=np.float64), np.asarray(b, dtype=np.float64))
