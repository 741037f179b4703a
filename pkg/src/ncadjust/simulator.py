"""Synthetic long-tailed feature sets under idealized neural collapse.

Training features of class k sit exactly at ``c_k w_k``. Test features are
``c_k w_k`` plus isotropic Gaussian noise whose expected norm is
``sigma_k = s * c_k / sqrt(n_k)``, so the angular spread of a class shrinks
like ``1/sqrt(n_k)``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ContractError, ProfileError
from .stats import ClassStats

# Sub-stream tags mixed into the seed, one per split.
_TRAIN, _TEST, _VALIDATION = 0, 1, 2


class Kind(str, Enum):
    TRAIN = "train"
    TEST = "test"
    VALIDATION = "validation"


@dataclass(frozen=True, eq=False)
class FeatureSet:
    features: np.ndarray
    labels: np.ndarray
    kind: Kind
    num_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ContractError("features must be (N, d) with one label per row")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ContractError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(x)):
            raise ContractError("features must be finite")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "kind", Kind(self.kind))

    def __len__(self):
        return self.labels.size

    @property
    def feature_dim(self):
        return self.features.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class LongTailProfile:
    num_classes: int
    head_count: int
    imbalance: float


def make_counts(profile):
    """Exponentially decaying class sizes ``n_1 * rho^(-(k-1)/(K-1))``, rounded half up."""
    K, n1, rho = profile.num_classes, profile.head_count, profile.imbalance
    if K < 3 or n1 < 1 or not rho >= 1:
        raise ProfileError(f"need K >= 3, n_1 >= 1, rho >= 1; got K={K}, n_1={n1}, rho={rho}")
    raw = n1 * float(rho) ** (-np.arange(K) / (K - 1))
    counts = np.floor(raw + 0.5).astype(np.int64)
    if np.any(counts < 1):
        raise ProfileError(f"class {int(np.argmax(counts < 1))} rounds to zero samples")
    return counts


@dataclass(frozen=True)
class ScenarioConfig:
    profile: LongTailProfile
    feature_dim: int
    mean_norm_base: float = 10.0
    norm_multipliers: tuple | None = None
    spread_scale: float = 1.0
    test_per_class: int = 100
    val_per_class: int = 20
    seed: int = 0
    jitter: float = 0.0
    _counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        K = self.profile.num_classes
        if self.feature_dim < K - 1:
            raise ContractError(f"feature_dim {self.feature_dim} < K-1 = {K - 1}")
        if not self.spread_scale > 0 or not self.mean_norm_base > 0:
            raise ContractError("spread_scale and mean_norm_base must be positive")
        if self.test_per_class < 1 or self.val_per_class < 0:
            raise ContractError("test_per_class must be >= 1 and val_per_class >= 0")
        if self.norm_multipliers is not None:
            m = np.asarray(self.norm_multipliers, dtype=np.float64)
            if m.shape != (K,) or np.any(m <= 0):
                raise ContractError("norm_multipliers needs K positive entries")
        if self.jitter < 0:
            raise ContractError("jitter must be >= 0")
        object.__setattr__(self, "_counts", make_counts(self.profile))

    @property
    def counts(self):
        return self._counts

    @property
    def class_norms(self):
        c = np.full(self.profile.num_classes, float(self.mean_norm_base))
        if self.norm_multipliers is not None:
            c = c * np.asarray(self.norm_multipliers, dtype=np.float64)
        return c

    @property
    def spreads(self):
        return self.spread_scale * self.class_norms / np.sqrt(self.counts)


def _class_rng(seed, split, k):
    return np.random.default_rng([int(seed), split, int(k)])


def _noisy_split(config, etf, per_class, split, scales):
    K, d = etf.num_classes, etf.feature_dim
    centers = config.class_norms[:, None] * etf.weights
    blocks = []
    for k in range(K):
        if isinstance(per_class, int):
            n = per_class
        else:
            n = int(per_class[k])
        eps = _class_rng(config.seed, split, k).standard_normal((n, d))
        blocks.append(centers[k] + (scales[k] / np.sqrt(d)) * eps)
    counts = np.full(K, per_class) if isinstance(per_class, int) else np.asarray(per_class)
    return np.vstack(blocks), np.repeat(np.arange(K), counts)


def _check(config, etf):
    if etf.num_classes != config.profile.num_classes or etf.feature_dim != config.feature_dim:
        raise ContractError(
            f"ETF is {etf.num_classes}x{etf.feature_dim}, scenario wants "
            f"{config.profile.num_classes}x{config.feature_dim}"
        )


def generate(config, etf):
    """Return ``(train, test, stats)`` for a scenario; fully determined by ``config.seed``."""
    _check(config, etf)
    K = etf.num_classes
    counts = config.counts
    train_x, train_y = _noisy_split(
        config, etf, counts, _TRAIN, config.jitter * config.class_norms
    )
    test_x, test_y = _noisy_split(config, etf, config.test_per_class, _TEST, config.spreads)
    train = FeatureSet(train_x, train_y, Kind.TRAIN, K)
    test = FeatureSet(test_x, test_y, Kind.TEST, K)
    return train, test, ClassStats.from_features(train_x, train_y, K)


def generate_validation(config, etf):
    """Validation split drawn from the test distribution on an independent stream."""
    _check(config, etf)
    if config.val_per_class < 1:
        raise ContractError("val_per_class is 0; no validation split configured")
    x, y = _noisy_split(config, etf, config.val_per_class, _VALIDATION, config.spreads)
    return FeatureSet(x, y, Kind.VALIDATION, etf.num_classes)
