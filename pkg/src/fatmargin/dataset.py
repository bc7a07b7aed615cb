"""Labelled datasets and per-feature standardization."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StructureError


@dataclass
class Dataset:
    features: np.ndarray  # (M, n)
    labels: np.ndarray  # (M,) in {+1, -1}
    feature_names: list | None = None
    name: str = ""
    standardized: bool = False
    raw_column_count: int | None = None
    label_values: dict = field(default_factory=dict)  # original label -> +1/-1
    label_name: str | None = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.features.shape[0] != self.labels.size:
            raise StructureError(
                f"{self.features.shape[0]} feature rows but {self.labels.size} labels"
            )
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ConfigurationError("labels must be +1 or -1")
        if not np.all(np.isfinite(self.features)):
            raise ConfigurationError("features contain non-finite values")

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, index):
        return Dataset(
            self.features[index], self.labels[index], self.feature_names, self.name,
            self.standardized, self.raw_column_count, dict(self.label_values), self.label_name,
        )

    def require_both_classes(self):
        if np.all(self.labels == 1) or np.all(self.labels == -1):
            raise ConfigurationError("training data contains a single class")


@dataclass
class StandardizationParams:
    mean: np.ndarray
    scale: np.ndarray
    standardized: bool = True

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0.0] = 1.0  # constant columns are only centred
        return cls(mean, scale, True)

    @classmethod
    def identity(cls, n_features):
        return cls(np.zeros(n_features), np.ones(n_features), False)

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.size:
            raise StructureError(f"expected {self.mean.size} features, got {X.shape[-1]}")
        return (X - self.mean) / self.scale

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=np.float64) * self.scale + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist(), "standardized": self.standardized}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64),
                   bool(d["standardized"]))
