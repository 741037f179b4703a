from dataclasses import dataclass

import numpy as np

from .errors import StatsError


@dataclass(frozen=True, eq=False)
class ClassStats:
    """Per-class training counts and mean-feature norms.

    Classes are indexed head first, so counts must be nonincreasing.
    """

    counts: np.ndarray
    mean_norms: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts)
        norms = np.array(self.mean_norms, dtype=np.float64)
        if counts.ndim != 1 or norms.shape != counts.shape:
            raise StatsError("counts and mean_norms must be 1-D arrays of equal length")
        if counts.size == 0:
            raise StatsError("no classes")
        if not np.all(np.equal(np.mod(counts, 1), 0)):
            raise StatsError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts <= 0):
            empty = np.flatnonzero(counts <= 0).tolist()
            raise StatsError(f"classes {empty} have no training samples")
        if np.any(np.diff(counts) > 0):
            raise StatsError("counts must be sorted in nonincreasing order (head classes first)")
        if not np.all(np.isfinite(norms)) or np.any(norms <= 0):
            raise StatsError("mean feature norms must be finite and positive")
        counts.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "mean_norms", norms)

    @property
    def num_classes(self):
        return self.counts.size

    @property
    def imbalance(self):
        return float(self.counts[0] / self.counts[-1])

    @classmethod
    def equal(cls, num_classes, count, norm=1.0):
        return cls(np.full(num_classes, count), np.full(num_classes, norm))

    @classmethod
    def from_features(cls, features, labels, num_classes):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels)
        counts = np.bincount(labels, minlength=num_classes)
        if np.any(counts == 0):
            empty = np.flatnonzero(counts == 0).tolist()
            raise StatsError(f"classes {empty} have no training samples")
        sums = np.zeros((num_classes, features.shape[1]))
        np.add.at(sums, labels, features)
        means = sums / counts[:, None]
        return cls(counts, np.linalg.norm(means, axis=1))

    def to_dict(self):
        return {"counts": self.counts.tolist(), "mean_norms": self.mean_norms.tolist()}
