"""Problem primitives: samples, datasets, iterates, and loss families.

All types are immutable value objects after construction; they can be shared
freely across threads or worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.special import expit


class LossModel(Enum):
    """Loss family applied per sample.

    squared   : 0.5 * (x.theta - y)^2
    absolute  : |x.theta - y|
    logistic  : log(1 + exp(-y * x.theta)), y in {-1, +1}
    """

    SQUARED = "squared"
    ABSOLUTE = "absolute"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class Iterate:
    """Joint variable: model parameters plus the quantile estimate."""

    theta: np.ndarray
    alpha: float

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        if theta.ndim != 1:
            raise ValueError("theta must be a 1-d vector")
        if not np.isfinite(theta).all():
            raise ValueError("theta contains non-finite entries")
        alpha = float(self.alpha)
        if not math.isfinite(alpha):
            raise ValueError("alpha is not finite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "alpha", alpha)

    @property
    def d(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class Sample:
    """One observation. Dense when ``indices`` is None, else (index, value) pairs."""

    values: np.ndarray
    target: float
    indices: np.ndarray | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("feature values must be 1-d")
        if not np.isfinite(values).all():
            raise ValueError("features contain non-finite entries")
        target = float(self.target)
        if not math.isfinite(target):
            raise ValueError("target is not finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target", target)
        if self.indices is not None:
            idx = np.ascontiguousarray(self.indices, dtype=np.int64)
            if idx.shape != values.shape:
                raise ValueError("indices and values must have equal length")
            if idx.size and (np.diff(idx) <= 0).any():
                raise ValueError("sparse indices must be strictly increasing")
            if idx.size and idx[0] < 0:
                raise ValueError("negative feature index")
            object.__setattr__(self, "indices", idx)

    def dot(self, theta: np.ndarray) -> float:
        if self.indices is None:
            if self.values.shape[0] != theta.shape[0]:
                raise ValueError(
                    f"dimension mismatch: sample has {self.values.shape[0]} features, theta has {theta.shape[0]}"
                )
            return float(self.values @ theta)
        if self.indices.size and self.indices[-1] >= theta.shape[0]:
            raise ValueError(
                f"dimension mismatch: sparse index {int(self.indices[-1])} out of range for theta of length {theta.shape[0]}"
            )
        return float(self.values @ theta[self.indices])

    def norm_sq(self) -> float:
        return float(self.values @ self.values)

    def add_scaled(self, out: np.ndarray, coef: float) -> None:
        """out += coef * features, touching only nonzeros for sparse samples."""
        if self.indices is None:
            out += coef * self.values
        else:
            out[self.indices] += coef * self.values

    def to_dense(self, d: int) -> np.ndarray:
        if self.indices is None:
            if self.values.shape[0] != d:
                raise ValueError("dimension mismatch")
            return self.values.copy()
        x = np.zeros(d)
        x[self.indices] = self.values
        return x


@dataclass(frozen=True)
class Dataset:
    """Feature rows with targets; the empirical distribution the solvers sample.

    ``X`` is a dense (n, d) float64 array or a scipy CSR matrix.
    """

    X: np.ndarray | sparse.csr_matrix
    y: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if y.ndim != 1:
            raise ValueError("targets must be 1-d")
        if not np.isfinite(y).all():
            raise ValueError("targets contain non-finite entries")
        object.__setattr__(self, "y", y)
        X = self.X
        if sparse.issparse(X):
            X = sparse.csr_matrix(X, dtype=np.float64)
            if not np.isfinite(X.data).all():
                raise ValueError("features contain non-finite entries")
        else:
            X = np.ascontiguousarray(X, dtype=np.float64)
            if X.ndim != 2:
                raise ValueError("X must be 2-d")
            if not np.isfinite(X).all():
                raise ValueError("features contain non-finite entries")
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y row counts differ")
        if X.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.X)

    def sample(self, i: int) -> Sample:
        if self.is_sparse:
            s, e = self.X.indptr[i], self.X.indptr[i + 1]
            return Sample(
                values=self.X.data[s:e],
                target=float(self.y[i]),
                indices=self.X.indices[s:e].astype(np.int64),
            )
        return Sample(values=self.X[i], target=float(self.y[i]))

    def require_binary_labels(self) -> None:
        bad = ~np.isin(self.y, (-1.0, 1.0))
        if bad.any():
            raise ValueError(
                f"classification targets must be exactly -1 or +1; found {self.y[bad][:5]}"
            )

    @classmethod
    def dense(cls, X, y) -> "Dataset":
        return cls(X=np.asarray(X, dtype=np.float64), y=np.asarray(y, dtype=np.float64))


def _check_theta(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if not np.isfinite(theta).all():
        raise ValueError("theta contains non-finite entries")
    return theta


def _stable_sigmoid(t: float) -> float:
    # scalar expit; exp() only ever sees non-positive arguments
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def loss_value(model: LossModel, theta: np.ndarray, z: Sample) -> float:
    """Per-sample loss. Logistic uses log1p(exp(-|m|)) + max(-m, 0), m = y*x.theta,
    so margins up to |m| ~ 1e3 evaluate without overflow."""
    theta = _check_theta(theta)
    pred = z.dot(theta)
    if model is LossModel.SQUARED:
        r = pred - z.target
        return 0.5 * r * r
    if model is LossModel.ABSOLUTE:
        return abs(pred - z.target)
    m = z.target * pred
    return math.log1p(math.exp(-abs(m))) + max(-m, 0.0)


def subgradient_scale(model: LossModel, theta: np.ndarray, z: Sample) -> float:
    """Scalar s such that s * x is the chosen subgradient element.

    squared  -> (x.theta - y)
    absolute -> sign(x.theta - y), with sign(0) := 0 (kink convention)
    logistic -> -y * sigmoid(-y * x.theta)
    """
    theta = _check_theta(theta)
    pred = z.dot(theta)
    if model is LossModel.SQUARED:
        return pred - z.target
    if model is LossModel.ABSOLUTE:
        r = pred - z.target
        return float(np.sign(r))
    m = z.target * pred
    return -z.target * _stable_sigmoid(-m)


def loss_subgradient(model: LossModel, theta: np.ndarray, z: Sample) -> np.ndarray:
    """One deterministic element of the convex subdifferential, as a dense vector."""
    theta = _check_theta(theta)
    s = subgradient_scale(model, theta, z)
    g = np.zeros(theta.shape[0])
    z.add_scaled(g, s)
    return g


def loss_values(model: LossModel, theta: np.ndarray, data: Dataset) -> np.ndarray:
    """Vector of per-sample losses over the whole dataset."""
    theta = _check_theta(theta)
    if theta.shape[0] != data.d:
        raise ValueError(f"dimension mismatch: theta has {theta.shape[0]}, data has {data.d}")
    pred = data.X @ theta
    if model is LossModel.SQUARED:
        r = pred - data.y
        return 0.5 * r * r
    if model is LossModel.ABSOLUTE:
        return np.abs(pred - data.y)
    m = data.y * pred
    return np.log1p(np.exp(-np.abs(m))) + np.maximum(-m, 0.0)


def subgradient_scales(model: LossModel, theta: np.ndarray, data: Dataset) -> np.ndarray:
    """Vector of per-sample subgradient scales (see subgradient_scale)."""
    theta = _check_theta(theta)
    if theta.shape[0] != data.d:
        raise ValueError(f"dimension mismatch: theta has {theta.shape[0]}, data has {data.d}")
    pred = data.X @ theta
    if model is LossModel.SQUARED:
        return pred - data.y
    if model is LossModel.ABSOLUTE:
        return np.sign(pred - data.y)
    return -data.y * expit(-data.y * pred)


def row_norms_sq(data: Dataset) -> np.ndarray:
    """Per-row squared feature norms (used by the prox-linear step sizes)."""
    if data.is_sparse:
        sq = data.X.copy()
        sq.data **= 2
        return np.asarray(sq.sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", data.X, data.X)
