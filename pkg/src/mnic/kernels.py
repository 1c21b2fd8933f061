"""Kernel functions, explicit feature maps and Gram matrices.

All kernels operate on float64 arrays. A batch of points is a 2-D array with
one point per row.

The Gaussian kernel is parameterized as ``exp(-|x - z|^2 / (2 bandwidth^2))``
so that ``k(x, x) = 1`` exactly for every input.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

__all__ = [
    "KernelSpec",
    "Dataset",
    "FEATURE_MAPS",
    "register_feature_map",
    "features",
    "eval",
    "gram",
    "cross_gram",
]

KINDS = ("linear", "gaussian", "polynomial", "features")


def _identity_map(X):
    return X


def _quadratic_map(X):
    # <phi(x), phi(z)> = <x, z> + <x, z>^2
    n, d = X.shape
    iu = np.triu_indices(d)
    outer = X[:, :, None] * X[:, None, :]
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return np.hstack([X, outer[:, iu[0], iu[1]] * scale])


FEATURE_MAPS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": _identity_map,
    "quadratic": _quadratic_map,
}


def register_feature_map(name, fn):
    """Register an explicit feature map ``fn(X) -> Phi`` under ``name``.

    ``fn`` receives an ``(m, input_dim)`` array and must return an ``(m, p)``
    array with a fixed ``p``.
    """
    FEATURE_MAPS[name] = fn


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to use and its parameters.

    Parameters
    ----------
    kind
        One of ``"linear"``, ``"gaussian"``, ``"polynomial"``, ``"features"``.
    input_dim
        Dimension of the input points. ``None`` skips the dimension check
        (useful when the dimension is fixed later, e.g. by a generative model).
    bandwidth
        Gaussian bandwidth, must be positive.
    degree, offset
        Polynomial kernel ``(<x, z> + offset) ** degree``.
    feature_map
        Name of a registered explicit feature map (``kind="features"``).
    """

    kind: str = "linear"
    input_dim: Optional[int] = None
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0
    feature_map: str = "identity"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}, expected one of {KINDS}")
        if self.input_dim is not None and self.input_dim < 1:
            raise ValueError("input_dim must be a positive integer")
        if self.kind == "gaussian" and not self.bandwidth > 0:
            raise ValueError("Gaussian bandwidth must be positive")
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be an integer >= 1")
            if self.offset < 0:
                raise ValueError("polynomial offset must be nonnegative")
        if self.kind == "features" and self.feature_map not in FEATURE_MAPS:
            raise ValueError(f"unknown feature map {self.feature_map!r}")

    @classmethod
    def linear(cls, input_dim=None):
        return cls("linear", input_dim)

    @classmethod
    def gaussian(cls, bandwidth=1.0, input_dim=None):
        return cls("gaussian", input_dim, bandwidth=bandwidth)

    @classmethod
    def polynomial(cls, degree=2, offset=1.0, input_dim=None):
        return cls("polynomial", input_dim, degree=degree, offset=offset)

    @classmethod
    def explicit(cls, feature_map="identity", input_dim=None):
        return cls("features", input_dim, feature_map=feature_map)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.input_dim is not None:
            out["input_dim"] = self.input_dim
        if self.kind == "gaussian":
            out["bandwidth"] = self.bandwidth
        elif self.kind == "polynomial":
            out["degree"] = self.degree
            out["offset"] = self.offset
        elif self.kind == "features":
            out["feature_map"] = self.feature_map
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", "linear")
        allowed = {"input_dim", "bandwidth", "degree", "offset", "feature_map"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown kernel keys: {sorted(unknown)}")
        return cls(kind, **d)


@dataclass
class Dataset:
    """A finite labelled sample; ``X`` has one point per row."""

    X: np.ndarray
    y: np.ndarray
    classification: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1) if self.X.size else self.X.reshape(0, 0)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.X.shape[0]} points but {self.y.shape[0]} labels")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("labels must be finite")
        if self.classification and not np.all(np.abs(self.y) == 1):
            raise ValueError("classification labels must be in {-1, +1}")

    @property
    def n(self):
        return self.y.shape[0]

    def __len__(self):
        return self.n

    def __iter__(self):
        return zip(self.X, self.y)


def _as_batch(spec, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError("points must be vectors")
    if spec.input_dim is not None and X.shape[0] and X.shape[1] != spec.input_dim:
        raise ValueError(f"expected dimension {spec.input_dim}, got {X.shape[1]}")
    return X


def features(spec, X):
    """Explicit feature rows ``phi(x)`` for ``kind="features"`` or ``"linear"``."""
    X = _as_batch(spec, X)
    if spec.kind == "linear":
        return X
    if spec.kind == "features":
        return np.asarray(FEATURE_MAPS[spec.feature_map](X), dtype=np.float64)
    raise ValueError(f"kernel kind {spec.kind!r} has no finite feature map")


def _block(spec, A, B):
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "polynomial":
        return (A @ B.T + spec.offset) ** spec.degree
    if spec.kind == "features":
        return features(spec, A) @ features(spec, B).T
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.bandwidth ** 2))


def eval(spec, x, z):
    """Kernel value ``k(x, z)`` for two single points."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {z.shape[0]}")
    if spec.kind == "gaussian":
        diff = x - z
        return float(np.exp(-(diff @ diff) / (2.0 * spec.bandwidth ** 2)))
    return float(_block(spec, _as_batch(spec, x), _as_batch(spec, z))[0, 0])


def gram(spec, X):
    """Symmetric kernel matrix ``K[i, j] = k(x_i, x_j)``."""
    X = _as_batch(spec, X)
    if X.shape[0] == 0:
        raise ValueError("gram needs at least one point")
    K = _block(spec, X, X)
    K = 0.5 * (K + K.T)
    if spec.kind == "gaussian":
        np.fill_diagonal(K, 1.0)
    return K


def cross_gram(spec, X, z):
    """Vector ``(k(x_1, z), ..., k(x_m, z))``; empty when ``X`` is empty.

    ``z`` may also be a 2-D batch, in which case an ``(m, len(z))`` block is
    returned.
    """
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = _as_batch(spec, z)
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return np.zeros(0) if single else np.zeros((0, Z.shape[0]))
    X = _as_batch(spec, X)
    out = _block(spec, X, Z)
    return out[:, 0] if single else out
