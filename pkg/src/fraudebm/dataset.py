"""Tabular binary-classification data: loading, validation, stratified folds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ValidationError


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with binary labels.

    ``X`` is an n x p float64 matrix, ``y`` a vector of 0/1 labels.
    Row order is canonical (file order), so seeded shuffles downstream
    are meaningful.
    """

    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise ValidationError("X must be a 2-D matrix")
        if y.shape != (X.shape[0],):
            raise ValidationError("y length must match X rows")
        if not np.isin(y, (0, 1)).all():
            raise ValidationError("labels must be exactly 0 or 1")
        if not np.isfinite(X).all():
            bad = np.argwhere(~np.isfinite(X))[0]
            raise ValidationError(
                f"non-finite value at row {bad[0]}, column {bad[1]}"
            )
        if len(self.feature_names) != X.shape[1]:
            raise ValidationError("feature_names length must equal column count")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValidationError("feature names must be unique")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int64))
        self.X.flags.writeable = False
        self.y.flags.writeable = False

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n_pos(self) -> int:
        return int(self.y.sum())

    @property
    def n_neg(self) -> int:
        return self.n - self.n_pos


@dataclass(frozen=True)
class StratifiedFolds:
    """Fold assignment where each fold's class counts are within 1 of the
    proportional share."""

    k: int
    assignment: np.ndarray
    seed: int

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


def load_csv(path, label_column: str = "Class") -> Dataset:
    """Load a UTF-8 comma-separated file with a header row.

    Every non-label cell must parse to a finite float and every label must
    be a literal 0 or 1; violations are rejected with row/column
    coordinates (rows counted from the first data row, 0-based).
    """
    try:
        frame = pd.read_csv(path, header=0)
    except OSError as exc:
        raise exc
    except Exception as exc:  # malformed CSV structure
        raise ValidationError(f"cannot parse {path}: {exc}") from exc
    if label_column not in frame.columns:
        raise ValidationError(
            f"label column {label_column!r} not found in header"
        )
    feature_names = [c for c in frame.columns if c != label_column]
    X = np.empty((len(frame), len(feature_names)), dtype=np.float64)
    for j, name in enumerate(feature_names):
        col = pd.to_numeric(frame[name], errors="coerce").to_numpy(np.float64)
        if not np.isfinite(col).all():
            row = int(np.flatnonzero(~np.isfinite(col))[0])
            raise ValidationError(
                f"non-numeric or non-finite cell at row {row}, column {name!r}"
            )
        X[:, j] = col
    labels = pd.to_numeric(frame[label_column], errors="coerce").to_numpy()
    bad = ~np.isin(labels, (0, 1))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ValidationError(
            f"label outside {{0,1}} at row {row}, column {label_column!r}"
        )
    return Dataset(feature_names, X, labels.astype(np.int64))


def stratified_kfold(ds: Dataset, k: int, seed: int) -> StratifiedFolds:
    """Shuffle rows within each class by seed and deal round-robin into k
    folds, which keeps every fold's class counts within 1 of proportional."""
    if k < 2:
        raise ValidationError("k must be at least 2")
    n_pos, n_neg = ds.n_pos, ds.n_neg
    if k > n_pos or k > n_neg:
        limiting = "positive" if n_pos <= n_neg else "negative"
        raise ValidationError(
            f"k exceeds minority class count: k={k}, "
            f"{limiting} class has {min(n_pos, n_neg)} rows"
        )
    rng = np.random.default_rng(seed)
    assignment = np.empty(ds.n, dtype=np.int64)
    for label in (0, 1):
        idx = np.flatnonzero(ds.y == label)
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % k
    return StratifiedFolds(k=k, assignment=assignment, seed=seed)


def select_features(ds: Dataset, feature_ids: list[int]) -> Dataset:
    """New Dataset with columns in the requested order; labels unchanged."""
    ids = list(feature_ids)
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate feature index")
    for i in ids:
        if not (0 <= i < ds.p):
            raise ValidationError(f"feature index {i} out of range [0, {ds.p})")
    return Dataset(
        feature_names=[ds.feature_names[i] for i in ids],
        X=ds.X[:, ids],
        y=ds.y,
    )


def subset_rows(ds: Dataset, rows: np.ndarray) -> Dataset:
    """Row subset (used for CV folds); feature names and order preserved."""
    return Dataset(ds.feature_names, ds.X[rows], ds.y[rows])
