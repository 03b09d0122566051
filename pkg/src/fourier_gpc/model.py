"""Trained classifier, predictive probabilities and the model file format.

The model file is a UTF-8 JSON document::

    {
      "format_version": 1,
      "mode": "rff" | "vff",
      "dims": {"n_train": n, "d": d, "D": D},
      "basis": [...D*d numbers, row-major...],
      "basis_seed": seed or null,
      "sigma": ..., "gamma": ...,
      "mu": [...2D numbers...],
      "sigma_matrix": [...(2D)^2 numbers, row-major...],
      "preprocessing": {"kind": ..., "means": [...], "stds": [...], "pca_components": ...},
      "train_meta": {...}
    }

Feature columns are interleaved ``cos_1, sin_1, ..., cos_D, sin_D`` and
numbers are written in shortest round-trip decimal form, so a save/load
cycle reproduces every array bit for bit.  For ``vff`` models ``basis``
holds the learned frequencies with the length-scale already divided in and
``sigma`` is 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import TransformSpec, apply_transform
from .errors import CorruptModelError, DomainError, UnsupportedVersionError
from .features import BasisMode, FrequencyBasis, project

__all__ = ["FORMAT_VERSION", "TrainedModel", "predict_proba", "predict_label", "save", "load"]

FORMAT_VERSION = 1

_P_MIN = np.finfo(np.float64).tiny
_P_MAX = 1.0 - 2.0**-53


@dataclass(frozen=True)
class TrainedModel:
    mode: str
    basis: FrequencyBasis
    sigma: float
    gamma: float
    mu: np.ndarray
    Sigma: np.ndarray
    preprocessing: TransformSpec
    train_meta: dict = field(default_factory=dict)
    n_train: int = 0
    format_version: int = FORMAT_VERSION

    @property
    def D(self) -> int:
        return self.basis.D

    @property
    def d(self) -> int:
        """Input dimension the feature map sees (after preprocessing)."""
        return self.basis.d

    @property
    def input_dim(self) -> int:
        """Column count expected from raw data."""
        return self.preprocessing.input_dim

    def validate(self):
        """Raise :class:`CorruptModelError` on any structural inconsistency."""
        m = 2 * self.D
        if self.mode not in ("rff", "vff"):
            raise CorruptModelError(f"unknown mode {self.mode!r}")
        mu = np.asarray(self.mu)
        S = np.asarray(self.Sigma)
        if mu.shape != (m,) or S.shape != (m, m):
            raise CorruptModelError(f"posterior shapes {mu.shape}, {S.shape} do not match D={self.D}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(S))):
            raise CorruptModelError("posterior has non-finite entries")
        if not (self.sigma > 0 and self.gamma > 0 and math.isfinite(self.sigma) and math.isfinite(self.gamma)):
            raise CorruptModelError("sigma and gamma must be positive and finite")
        if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(S), initial=0.0)):
            raise CorruptModelError("posterior covariance is not symmetric")
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise CorruptModelError("posterior covariance is not positive definite") from None
        if self.preprocessing.output_dim != self.d:
            raise CorruptModelError(
                f"preprocessing yields {self.preprocessing.output_dim} columns, basis expects {self.d}"
            )

    def features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DomainError(f"data has shape {X.shape}, model expects {self.input_dim} columns")
        return project(apply_transform(self.preprocessing, X), self.basis, self.sigma)

    def latent_moments(self, X):
        """Mean ``z'mu`` and variance ``z'Sigma z`` of the latent value per row."""
        Z = self.features(X)
        return Z @ self.mu, np.einsum("ij,ij->i", Z @ self.Sigma, Z)

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return predict_label(self, X, threshold)


def predict_proba(model: TrainedModel, X_star) -> np.ndarray:
    """Probability of class 1, ``sigmoid(z'mu / sqrt(1 + pi/8 z'Sigma z))``.

    Cost is O(D^2) per row and does not depend on the training-set size.
    Outputs are clipped into the open interval (0, 1).
    """
    mean, var = model.latent_moments(X_star)
    p = expit(mean / np.sqrt(1.0 + (math.pi / 8.0) * np.maximum(var, 0.0)))
    return np.clip(p, _P_MIN, _P_MAX)


def predict_label(model: TrainedModel, X_star, threshold: float = 0.5) -> np.ndarray:
    """Class labels; a probability equal to ``threshold`` is labelled 1."""
    if not 0.0 < threshold < 1.0:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}")
    return (predict_proba(model, X_star) >= threshold).astype(np.int64)


def to_document(model: TrainedModel) -> dict:
    return {
        "format_version": model.format_version,
        "mode": model.mode,
        "dims": {"n_train": int(model.n_train), "d": model.d, "D": model.D},
        "basis": model.basis.W.ravel().tolist(),
        "basis_seed": model.basis.seed,
        "sigma": float(model.sigma),
        "gamma": float(model.gamma),
        "mu": np.asarray(model.mu).tolist(),
        "sigma_matrix": np.asarray(model.Sigma).ravel().tolist(),
        "preprocessing": model.preprocessing.to_dict(),
        "train_meta": model.train_meta,
    }


def from_document(doc: dict) -> TrainedModel:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"model format version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    try:
        dims = doc["dims"]
        D, d = int(dims["D"]), int(dims["d"])
        W = np.array(doc["basis"], dtype=np.float64)
        mu = np.array(doc["mu"], dtype=np.float64)
        S = np.array(doc["sigma_matrix"], dtype=np.float64)
        if W.size != D * d or S.size != (2 * D) ** 2:
            raise CorruptModelError("array lengths do not match the recorded dimensions")
        mode = doc["mode"]
        basis = FrequencyBasis(
            W.reshape(D, d),
            BasisMode.FIXED_RANDOM if mode == "rff" else BasisMode.LEARNABLE,
            doc.get("basis_seed"),
        )
        model = TrainedModel(
            mode=mode,
            basis=basis,
            sigma=float(doc["sigma"]),
            gamma=float(doc["gamma"]),
            mu=mu,
            Sigma=S.reshape(2 * D, 2 * D),
            preprocessing=TransformSpec.from_dict(doc["preprocessing"]),
            train_meta=dict(doc.get("train_meta", {})),
            n_train=int(dims.get("n_train", 0)),
            format_version=version,
        )
    except CorruptModelError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelError(f"malformed model document: {exc}") from exc
    model.validate()
    return model


def save(model: TrainedModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_document(model), fh, indent=1, allow_nan=False)
        fh.write("\n")


def load(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptModelError(f"not a valid model document: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptModelError("model document must be a JSON object")
    return from_document(doc)
