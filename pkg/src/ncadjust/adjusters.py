"""Post-hoc decision-boundary adjustment: MLA, ALA and the one-vs-one adjuster.

Logits are ``g_k = w_k . f``. MLA rescales them by per-class factors
``kappa_k``, ALA subtracts ``gamma * ln n_k``, and the one-vs-one adjuster
votes over pairwise boundaries placed at the optimal angles.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bounds import optimal_angle_matrix
from .errors import ConfigError, ContractError, DomainError
from .etf import normal_coefficients
from .stats import ClassStats

__all__ = [
    "AdjustmentSpec",
    "ClassStats",
    "Method",
    "adjust_logits",
    "ala_boundary_angle",
    "ala_gap_and_gamma_star",
    "ala_offsets",
    "boundary_angle_from_factors",
    "classify",
    "mla_boundary_angle",
    "mla_factors",
    "one_vs_one_votes",
    "phi",
]


class Method(str, Enum):
    BASELINE = "baseline"
    MLA = "mla"
    ALA = "ala"
    ONE_VS_ONE = "one_vs_one"


@dataclass(frozen=True)
class AdjustmentSpec:
    """Which adjustment to apply and how strongly.

    ``gamma`` is the MLA exponent, the ALA offset scale or the one-vs-one
    exponent depending on ``method``; baseline ignores it.
    ``norm_aware`` switches MLA to ``kappa_k = alpha / (||mu_k|| n_k^gamma)``.
    """

    method: Method
    gamma: float = 0.0
    ala_feature_norm: float | None = None
    norm_aware: bool = False
    alpha: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError:
            raise ConfigError(
                f"unknown method {self.method!r}; expected one of {[m.value for m in Method]}"
            ) from None
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigError(f"gamma must be a finite value >= 0, got {self.gamma!r}")
        if self.ala_feature_norm is not None and not self.ala_feature_norm > 0:
            raise ConfigError("ala_feature_norm must be positive")
        if self.norm_aware and self.method is not Method.MLA:
            raise ConfigError("norm_aware only applies to mla")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")


def mla_factors(stats, gamma, alpha=1.0, norm_aware=False):
    if gamma < 0 or alpha <= 0:
        raise DomainError("mla factors need gamma >= 0 and alpha > 0")
    kappa = stats.counts.astype(np.float64) ** (-gamma)
    if norm_aware:
        kappa = alpha * kappa / stats.mean_norms
    return kappa


def ala_offsets(stats, gamma):
    return gamma * np.log(stats.counts.astype(np.float64))


def adjust_logits(logits, spec, stats):
    """Apply the logit transform of ``spec`` to a (K,) or (N, K) array."""
    g = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise DomainError("logits must be finite")
    if spec.method is Method.BASELINE:
        return g.copy()
    if spec.method is Method.MLA:
        return g * mla_factors(stats, spec.gamma, spec.alpha, spec.norm_aware)
    if spec.method is Method.ALA:
        return g - ala_offsets(stats, spec.gamma)
    raise ContractError("one_vs_one classifies by pairwise votes; use classify()")


def one_vs_one_votes(logits, angles, psi):
    """Vote counts of the one-vs-one adjuster for an (N, K) logit batch.

    ``angles[k, j]`` is the boundary angle measured from ``w_k``. Since the
    boundary normal is ``a w_k + b w_j``, its inner product with a feature
    is ``a g_k + b g_j``; no d-dimensional normals need to be formed.
    """
    g = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    K = g.shape[1]
    a, b = normal_coefficients(angles, angles.T, psi)
    off_diag = ~np.eye(K, dtype=bool)
    votes = np.empty(g.shape, dtype=np.int64)
    for k in range(K):
        side = a[k][None, :] * g[:, k : k + 1] + b[k][None, :] * g
        votes[:, k] = np.count_nonzero((side > 0) & off_diag[k][None, :], axis=1)
    return votes


def classify(features, etf, spec, stats):
    """Predicted class for a feature vector or an (N, d) batch.

    Ties go to the lowest class index.
    """
    f = np.asarray(features, dtype=np.float64)
    single = f.ndim == 1
    f = np.atleast_2d(f)
    if np.any(~f.any(axis=1)):
        raise DomainError("cannot classify a zero feature vector")
    g = etf.logits(f)
    if spec.method is Method.ONE_VS_ONE:
        angles = optimal_angle_matrix(stats, etf.psi, spec.gamma).angles
        pred = np.argmax(one_vs_one_votes(g, angles, etf.psi), axis=1)
    else:
        pred = np.argmax(adjust_logits(g, spec, stats), axis=1)
    return int(pred[0]) if single else pred


def mla_boundary_angle(n_k, n_other, psi, gamma):
    """MLA boundary angle from ``w_k`` in the large-K closed form used for heatmaps."""
    eps = math.pi / 2 - psi
    ratio = (float(n_other) / float(n_k)) ** gamma
    return math.atan((ratio + math.sin(eps)) / math.cos(eps))


def boundary_angle_from_factors(kappa_k, kappa_other, psi):
    """Exact angle from ``w_k`` where ``kappa_k cos t = kappa_other cos(psi - t)``."""
    return math.atan((kappa_k / kappa_other - math.cos(psi)) / math.sin(psi))


def ala_boundary_angle(n_k, n_other, psi, gamma, f_norm):
    """ALA boundary angle from ``w_k`` for features of norm ``f_norm``; NaN if undefined."""
    if not f_norm > 0:
        raise DomainError("feature norm must be positive")
    arg = gamma * math.log(n_k / n_other) / (2 * f_norm * math.sin(psi / 2))
    if not -1.0 <= arg <= 1.0:
        return math.nan
    return psi / 2 - math.asin(arg)


def phi(theta):
    """Rational stand-in ``theta / (1 - theta)`` for ``tan(pi theta / 2)`` on [0, 1)."""
    if not 0.0 <= theta < 1.0:
        raise DomainError(f"phi is defined on [0, 1), got {theta!r}")
    return theta / (1.0 - theta)


def ala_gap_and_gamma_star(psi):
    """Return the ALA gap function ``g(tau)`` and its tangent-matched scale.

    ``g(tau) = 2 sin(psi/2) sin((psi/2)(1 - 2/(tau + 1)))`` is the logit
    offset ALA would need; ``2 gamma* ln tau`` matches its value and slope
    at ``tau = 1``.
    """
    if not math.pi / 2 < psi < math.pi:
        raise DomainError(f"psi must lie in (pi/2, pi), got {psi!r}")
    half = psi / 2
    s = math.sin(half)

    def gap(tau):
        return 2 * s * np.sin(half * (1 - 2 / (np.asarray(tau, dtype=np.float64) + 1)))

    return gap, (psi / 4) * s
