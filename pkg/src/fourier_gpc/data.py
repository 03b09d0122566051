"""Dataset ingestion, preprocessing transforms, balanced sampling and metrics."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IngestionError

__all__ = [
    "Dataset",
    "TransformKind",
    "TransformSpec",
    "read_matrix",
    "load_csv",
    "save_csv",
    "fit_standardize",
    "fit_pca",
    "fit_preprocessing",
    "apply_transform",
    "balanced_indices",
    "balanced_sample",
    "overall_accuracy",
    "confusion_counts",
]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary labels in {0, 1}."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise DomainError(f"X must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DomainError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        if not np.all(np.isfinite(X)):
            raise DomainError("X has non-finite entries")
        if not np.all((y == 0) | (y == 1)):
            raise DomainError(f"labels must be 0 or 1, found {sorted(set(np.unique(y).tolist()) - {0, 1})}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int64))
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DomainError("feature_names length does not match the column count")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names)


def _parse_float(cell, row, col):
    try:
        value = float(cell)
    except ValueError:
        raise IngestionError(f"row {row}, column {col}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise IngestionError(f"row {row}, column {col}: non-finite value {cell!r}")
    return value


def _looks_numeric(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_matrix(path, header: bool | None = None):
    """Parse a numeric CSV file into ``(column_names, matrix)``.

    ``column_names`` is None when there is no header.  ``header=None`` treats
    the first row as a header when any of its cells is not a number.  Row
    and column numbers in error messages are one-based and count the header.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header is None:
        header = bool(rows) and not all(_looks_numeric(c) for c in rows[0])
    names = [c.strip() for c in rows[0]] if header and rows else None
    body = rows[1:] if header else rows
    first_row = 2 if header else 1
    width = len(names) if names is not None else (len(body[0]) if body else 0)
    M = np.empty((len(body), width))
    for i, r in enumerate(body):
        rownum = first_row + i
        if len(r) != width:
            raise IngestionError(f"row {rownum}: expected {width} columns, found {len(r)}")
        M[i] = [_parse_float(c.strip(), rownum, j + 1) for j, c in enumerate(r)]
    return names, M


def load_csv(path, label_column=None, header: bool | None = None) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    Parameters
    ----------
    path : str or path-like
        UTF-8 file with '.' as decimal separator.
    label_column : str or int, optional
        Column name (requires a header) or zero-based index.  When omitted,
        a header column called ``label`` or ``y`` is used.
    header : bool, optional
        Whether the first row is a header; detected when None.

    Labels in {0, 1} are kept; labels in {-1, 1} map -1 to 0.
    """
    names, M = read_matrix(path, header)
    if label_column is None:
        if names is None:
            raise IngestionError("no label column given and the file has no header")
        for cand in ("label", "y"):
            if cand in names:
                label_column = cand
                break
        else:
            raise IngestionError("no label column given and no header column named 'label' or 'y'")
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if names is None:
            raise IngestionError(f"label column {label_column!r} given by name but the file has no header")
        if label_column not in names:
            raise IngestionError(f"label column {label_column!r} not found in header {names}")
        label_idx = names.index(label_column)
    else:
        label_idx = int(label_column)
    width = M.shape[1]
    if not 0 <= label_idx < width:
        if M.shape[0] == 0 and names is None:
            return Dataset(np.empty((0, 0)), np.empty(0, dtype=np.int64))
        raise IngestionError(f"label column index {label_idx} out of range for {width} columns")

    raw_y = M[:, label_idx]
    X = np.delete(M, label_idx, axis=1)
    labels = set(np.unique(raw_y).tolist())
    if labels <= {0.0, 1.0}:
        y = raw_y
    elif labels <= {-1.0, 1.0}:
        y = (raw_y == 1.0).astype(np.float64)
    else:
        bad = sorted(labels - {0.0, 1.0, -1.0}) or sorted(labels)
        raise IngestionError(f"labels must be {{0,1}} or {{-1,1}}; offending values: {bad}")

    feat_names = None
    if names is not None:
        feat_names = names[:label_idx] + names[label_idx + 1 :]
    return Dataset(X, y.astype(np.int64), feat_names)


def save_csv(path, dataset: Dataset, label_name: str = "label"):
    """Write a dataset with a header, label in the last column."""
    names = dataset.feature_names or [f"x{j}" for j in range(dataset.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [label_name])
        for xi, yi in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in xi] + [int(yi)])


class TransformKind(str, enum.Enum):
    NONE = "none"
    STANDARDIZE = "standardize"
    STANDARDIZE_PCA = "standardize_pca"


@dataclass(frozen=True)
class TransformSpec:
    """Column standardization, optionally followed by a PCA projection.

    ``apply`` computes ``((X - means) / stds) @ pca_components.T``.
    """

    kind: TransformKind
    means: np.ndarray
    stds: np.ndarray
    pca_components: np.ndarray | None = None
    explained_variance_ratio: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", TransformKind(self.kind))
        means = np.asarray(self.means, dtype=np.float64).ravel()
        stds = np.asarray(self.stds, dtype=np.float64).ravel()
        if means.shape != stds.shape:
            raise DomainError("means and stds must have the same length")
        if np.any(stds <= 0) or not np.all(np.isfinite(stds)) or not np.all(np.isfinite(means)):
            raise DomainError("stds must be positive and statistics finite")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        if self.pca_components is not None:
            P = np.atleast_2d(np.asarray(self.pca_components, dtype=np.float64))
            if P.shape[1] != means.shape[0]:
                raise DomainError("PCA components do not match the input dimension")
            object.__setattr__(self, "pca_components", P)
        if (self.kind is TransformKind.STANDARDIZE_PCA) != (self.pca_components is not None):
            raise DomainError("PCA components must be present exactly for the standardize_pca kind")

    @property
    def input_dim(self) -> int:
        return self.means.shape[0]

    @property
    def output_dim(self) -> int:
        return self.input_dim if self.pca_components is None else self.pca_components.shape[0]

    @property
    def k(self) -> int | None:
        return None if self.pca_components is None else self.pca_components.shape[0]

    @classmethod
    def identity(cls, d: int) -> "TransformSpec":
        return cls(TransformKind.NONE, np.zeros(d), np.ones(d))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "pca_components": None if self.pca_components is None else self.pca_components.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TransformSpec":
        P = doc.get("pca_components")
        return cls(
            doc["kind"],
            np.array(doc["means"], dtype=np.float64),
            np.array(doc["stds"], dtype=np.float64),
            None if P is None else np.array(P, dtype=np.float64),
        )


def fit_standardize(X) -> TransformSpec:
    """Column z-scoring from training statistics; constant columns get std 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("need a non-empty 2-D matrix")
    const = np.ptp(X, axis=0) == 0
    # the mean of a constant column may be off by round-off; use the value itself
    means = np.where(const, X[0], X.mean(axis=0))
    stds = np.where(const, 1.0, X.std(axis=0))
    return TransformSpec(TransformKind.STANDARDIZE, means, stds)


def fit_pca(X_standardized, k: int) -> TransformSpec:
    """Top-``k`` principal directions of already standardized data.

    Uses the d x d covariance when ``d <= n`` and the n x n Gram matrix
    otherwise.  Each component is flipped so its largest-magnitude entry is
    positive.  The returned spec has zero means and unit stds.
    """
    X = np.asarray(X_standardized, dtype=np.float64)
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise DomainError(f"k must lie in [1, {min(n, d)}], got {k}")
    Xc = X - X.mean(axis=0)
    if d <= n:
        evals, evecs = np.linalg.eigh(Xc.T @ Xc / n)
        order = np.argsort(evals)[::-1]
        evals, comps = evals[order], evecs[:, order].T
    else:
        gvals, gvecs = np.linalg.eigh(Xc @ Xc.T / n)
        order = np.argsort(gvals)[::-1][:k]
        gvals, gvecs = gvals[order], gvecs[:, order]
        comps = (Xc.T @ gvecs).T
        comps /= np.linalg.norm(comps, axis=1, keepdims=True)
        evals = np.concatenate([gvals, np.zeros(d - k)])
    comps = comps[:k]
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivot])
    comps = comps * signs[:, None]
    total = float(np.sum(np.maximum(evals, 0.0)))
    ratio = np.maximum(evals[:k], 0.0) / total if total > 0 else np.zeros(k)
    return TransformSpec(
        TransformKind.STANDARDIZE_PCA, np.zeros(d), np.ones(d), comps, explained_variance_ratio=ratio
    )


def fit_preprocessing(X, kind: str | TransformKind = "standardize", k: int | None = None) -> TransformSpec:
    """Fit a complete transform on training data."""
    kind = TransformKind(kind)
    X = np.asarray(X, dtype=np.float64)
    if kind is TransformKind.NONE:
        return TransformSpec.identity(X.shape[1])
    std = fit_standardize(X)
    if kind is TransformKind.STANDARDIZE:
        return std
    if k is None:
        raise DomainError("PCA preprocessing needs k")
    pca = fit_pca(apply_transform(std, X), k)
    return TransformSpec(
        kind, std.means, std.stds, pca.pca_components, explained_variance_ratio=pca.explained_variance_ratio
    )


def apply_transform(spec: TransformSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise DomainError(f"data has shape {X.shape}, transform expects {spec.input_dim} columns")
    if spec.kind is TransformKind.NONE:
        return X.copy()
    Xs = (X - spec.means) / spec.stds
    if spec.pca_components is not None:
        Xs = Xs @ spec.pca_components.T
    return Xs


def balanced_indices(y, n_train: int, seed: int):
    """Indices of a class-balanced training draw and of the remainder.

    Both index arrays are in increasing order.
    """
    y = np.asarray(y)
    if n_train < 2 or n_train % 2:
        raise DomainError(f"n_train must be a positive even number, got {n_train}")
    half = n_train // 2
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = []
    for label in (0, 1):
        members = np.flatnonzero(y == label)
        if members.size < half:
            raise DomainError(
                f"class {label} has {members.size} instances, {half} needed (short by {half - members.size})"
            )
        chosen.append(rng.choice(members, size=half, replace=False))
    train = np.sort(np.concatenate(chosen))
    mask = np.ones(y.shape[0], dtype=bool)
    mask[train] = False
    return train, np.flatnonzero(mask)


def balanced_sample(dataset: Dataset, n_train: int, seed: int):
    """Split into a balanced training set of ``n_train`` rows and the rest."""
    train, rest = balanced_indices(dataset.y, n_train, seed)
    return dataset.subset(train), dataset.subset(rest)


def _check_labels(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise DomainError(f"length mismatch: {pred.shape[0]} predictions, {truth.shape[0]} labels")
    if pred.size == 0:
        raise DomainError("need at least one prediction")
    return pred, truth


def overall_accuracy(pred, truth) -> float:
    """Fraction of predictions equal to the true label."""
    pred, truth = _check_labels(pred, truth)
    return float(np.mean(pred == truth))


def confusion_counts(pred, truth) -> dict:
    pred, truth = _check_labels(pred, truth)
    return {
        "TN": int(np.sum((pred == 0) & (truth == 0))),
        "FP": int(np.sum((pred == 1) & (truth == 0))),
        "FN": int(np.sum((pred == 0) & (truth == 1))),
        "TP": int(np.sum((pred == 1) & (truth == 1))),
    }
