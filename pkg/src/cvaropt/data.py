"""Synthetic problem generation and the LIBSVM text-format parser.

Synthetic recipe (fully determined by the spec seed):
  * theta_gen uniform on [0,1]^d for regression, [0,10]^d for classification
    (the wider box increases linear separability)
  * features uniform on the unit sphere (normalized Box-Muller gaussians)
  * regression targets y = x.theta_gen + noise; classification targets +1 with
    probability sigmoid(x.theta_gen + noise) else -1, noise drawn per sample
  * noise samplers are pinned: Gumbel via the inverse CDF mu - scale*ln(-ln u),
    LogNormal and Normal via Box-Muller normals

Draw order from the single per-spec stream: theta_gen uniforms, feature
normals, noise draws, then (classification only) label uniforms. Seed 0 is
reserved by convention for evaluation sets; training streams use seeds >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
from scipy import sparse
from scipy.special import expit

from .model import Dataset, LossModel
from .rng import Stream, derive

_ROLE_GENERATE = 11
_DENSE_DIM_LIMIT = 512


class Task(Enum):
    SQUARED_REGRESSION = "squared-regression"
    ABSOLUTE_REGRESSION = "absolute-regression"
    LOGISTIC_CLASSIFICATION = "logistic-classification"

    @property
    def loss(self) -> LossModel:
        return {
            Task.SQUARED_REGRESSION: LossModel.SQUARED,
            Task.ABSOLUTE_REGRESSION: LossModel.ABSOLUTE,
            Task.LOGISTIC_CLASSIFICATION: LossModel.LOGISTIC,
        }[self]


class NoiseKind(Enum):
    NORMAL = "normal"
    GUMBEL = "gumbel"
    LOGNORMAL = "lognormal"


_NOISE_DEFAULTS = {
    NoiseKind.NORMAL: (0.0, 2.0),
    NoiseKind.GUMBEL: (0.0, 4.0),
    NoiseKind.LOGNORMAL: (2.0, 1.0),
}


@dataclass(frozen=True)
class NoiseSpec:
    """Noise distribution: (mu, scale) is (mean, std) for Normal, (location,
    scale) for Gumbel, (log-mean, log-std) for LogNormal."""

    kind: NoiseKind
    mu: float
    scale: float

    @classmethod
    def default(cls, kind: NoiseKind) -> "NoiseSpec":
        mu, scale = _NOISE_DEFAULTS[kind]
        return cls(kind=kind, mu=mu, scale=scale)


@dataclass(frozen=True)
class SyntheticSpec:
    task: Task
    noise: NoiseSpec
    d: int
    n: int
    seed: int

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be >= 1")

    @property
    def loss(self) -> LossModel:
        return self.task.loss


def gumbel_icdf(u, mu: float, scale: float):
    """Inverse CDF of Gumbel(mu, scale); u = 1/e maps exactly to mu."""
    return mu - scale * np.log(-np.log(u))


def _noise_draws(stream: Stream, noise: NoiseSpec, n: int) -> np.ndarray:
    if noise.kind is NoiseKind.NORMAL:
        return noise.mu + noise.scale * stream.normal(n)
    if noise.kind is NoiseKind.GUMBEL:
        return gumbel_icdf(stream.uniform_open(n), noise.mu, noise.scale)
    return np.exp(noise.mu + noise.scale * stream.normal(n))


def synthetic_problem(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Generate the dataset and also return the generating parameter vector."""
    stream = Stream(derive(spec.seed, _ROLE_GENERATE))
    hi = 10.0 if spec.task is Task.LOGISTIC_CLASSIFICATION else 1.0
    theta_gen = hi * stream.uniform(spec.d)

    raw = stream.normal(spec.n * spec.d).reshape(spec.n, spec.d)
    norms = np.linalg.norm(raw, axis=1)
    if (norms == 0.0).any():
        raise ValueError("degenerate zero feature draw")
    X = raw / norms[:, None]

    zeta = _noise_draws(stream, spec.noise, spec.n)
    margin = X @ theta_gen + zeta
    if spec.task is Task.LOGISTIC_CLASSIFICATION:
        u = stream.uniform(spec.n)
        y = np.where(u < expit(margin), 1.0, -1.0)
    else:
        y = margin
    return Dataset(X=X, y=y), theta_gen


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    return synthetic_problem(spec)[0]


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input, located by 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class SparseDataset:
    """Parsed sparse rows: 0-based (index, value) pairs, strictly increasing
    indices within each row; ``d`` is the largest 1-based on-disk index seen."""

    rows: list[list[tuple[int, float]]]
    labels: list[float]
    d: int


def parse_libsvm(source: Iterable[str] | TextIO, binary_labels: bool = False) -> SparseDataset:
    """Parse `<label> <idx>:<val> ...` lines; '#' starts a comment, blank lines
    are skipped. Indices are 1-based on disk and strictly increasing per row.

    With ``binary_labels``, two-valued label sets are mapped onto {-1, +1}
    (smaller label -> -1); {-1, +1} passes through; anything else is an error.
    """
    rows: list[list[tuple[int, float]]] = []
    labels: list[float] = []
    d = 0
    for line_no, line in enumerate(source, start=1):
        hash_pos = line.find("#")
        if hash_pos >= 0:
            line = line[:hash_pos]
        tokens = line.split()
        if not tokens:
            continue
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmParseError(line_no, f"non-numeric label {tokens[0]!r}") from None
        if not math.isfinite(label):
            raise LibsvmParseError(line_no, f"non-finite label {tokens[0]!r}")
        row: list[tuple[int, float]] = []
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep or not idx_s or not val_s:
                raise LibsvmParseError(line_no, f"malformed index:value pair {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise LibsvmParseError(line_no, f"non-integer feature index {idx_s!r}") from None
            if idx < 1:
                raise LibsvmParseError(line_no, f"feature index must be >= 1, got {idx}")
            if idx <= prev:
                raise LibsvmParseError(
                    line_no, f"feature indices must be strictly increasing ({idx} after {prev})"
                )
            try:
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(line_no, f"non-numeric feature value {val_s!r}") from None
            if not math.isfinite(val):
                raise LibsvmParseError(line_no, f"non-finite feature value {val_s!r}")
            row.append((idx - 1, val))
            prev = idx
        d = max(d, prev)
        rows.append(row)
        labels.append(label)

    if binary_labels:
        seen = sorted(set(labels))
        if set(seen) <= {-1.0, 1.0}:
            pass
        elif seen in ([0.0, 1.0], [1.0, 2.0]):
            lo = seen[0]
            labels = [-1.0 if lab == lo else 1.0 for lab in labels]
        else:
            raise ValueError(
                f"cannot map labels {seen} onto {{-1,+1}}; expected {{0,1}}, {{1,2}} or {{-1,+1}}"
            )
    return SparseDataset(rows=rows, labels=labels, d=d)


def read_libsvm(path, binary_labels: bool = False) -> SparseDataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_libsvm(fh, binary_labels=binary_labels)


def write_libsvm(ds: SparseDataset, target: TextIO | str | Path) -> None:
    """Serialize with full round-trip precision (repr floats, 1-based indices)."""

    def _emit(fh: TextIO) -> None:
        for label, row in zip(ds.labels, ds.rows):
            parts = [repr(label)] + [f"{idx + 1}:{val!r}" for idx, val in row]
            fh.write(" ".join(parts) + "\n")

    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            _emit(fh)
    else:
        _emit(target)


def to_dataset(sp: SparseDataset, dense: bool | None = None) -> Dataset:
    """Materialize a Dataset; small dimensions densify by default."""
    if not sp.rows:
        raise ValueError("empty sparse dataset (n = 0)")
    if sp.d < 1:
        raise ValueError("dataset has no features (d = 0)")
    if dense is None:
        dense = sp.d <= _DENSE_DIM_LIMIT
    y = np.asarray(sp.labels, dtype=np.float64)
    if dense:
        X = np.zeros((len(sp.rows), sp.d))
        for i, row in enumerate(sp.rows):
            for idx, val in row:
                X[i, idx] = val
        return Dataset(X=X, y=y)
    data, indices, indptr = [], [], [0]
    for row in sp.rows:
        for idx, val in row:
            indices.append(idx)
            data.append(val)
        indptr.append(len(indices))
    X = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(len(sp.rows), sp.d),
    )
    return Dataset(X=X, y=y)


def from_dataset(data: Dataset) -> SparseDataset:
    """Dataset -> sparse row form (used to serialize generated problems)."""
    rows: list[list[tuple[int, float]]] = []
    if data.is_sparse:
        for i in range(data.n):
            s, e = data.X.indptr[i], data.X.indptr[i + 1]
            rows.append([(int(j), float(v)) for j, v in zip(data.X.indices[s:e], data.X.data[s:e])])
    else:
        for i in range(data.n):
            xi = data.X[i]
            rows.append([(int(j), float(xi[j])) for j in np.nonzero(xi)[0]])
    return SparseDataset(rows=rows, labels=[float(v) for v in data.y], d=data.d)


def maxabs_scale(data: Dataset) -> tuple[Dataset, np.ndarray]:
    """Optional per-feature max-abs scaling (off by default everywhere)."""
    if data.is_sparse:
        scales = np.asarray(np.abs(data.X).max(axis=0).todense()).ravel()
        scales[scales == 0.0] = 1.0
        inv = sparse.diags(1.0 / scales)
        return Dataset(X=(data.X @ inv).tocsr(), y=data.y), scales
    scales = np.abs(data.X).max(axis=0)
    scales[scales == 0.0] = 1.0
    return Dataset(X=data.X / scales, y=data.y), scales
