"""Simplex equiangular tight frame (ETF) classifier geometry."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import helmert

from .errors import ContractError, DegenerateEtfError, DimensionError, DomainError

ANGLE_SUM_TOL = 1e-9


def psi(num_classes):
    """Angle between any two weight vectors of a K-class simplex ETF."""
    if num_classes < 2:
        raise DomainError(f"psi needs K >= 2, got {num_classes}")
    return float(np.arccos(-1.0 / (num_classes - 1)))


@dataclass(frozen=True, eq=False)
class EtfClassifier:
    """Fixed linear classifier whose K unit rows form a simplex ETF in R^d."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def feature_dim(self):
        return self.weights.shape[1]

    @property
    def psi(self):
        return psi(self.num_classes)

    def logits(self, features):
        """Raw scores ``w_k . f`` for a single feature or an (N, d) batch."""
        return np.asarray(features, dtype=np.float64) @ self.weights.T


def build_etf(num_classes, feature_dim, seed=0):
    """Build a K x d simplex ETF.

    The seed fixes a random orthonormal frame of R^d; any two seeds give
    ETFs that differ only by a rotation.
    """
    K, d = int(num_classes), int(feature_dim)
    if K < 3:
        raise DegenerateEtfError(
            f"K={K}: the inter-weight angle is pi and pairwise boundary normals vanish; need K >= 3"
        )
    if d < K - 1:
        raise DimensionError(f"no simplex ETF with K={K} exists in d={d} < K-1 dimensions")
    rng = np.random.default_rng(seed)
    # Orthonormal frame for the (K-1)-dim image of the centering matrix.
    frame, _ = np.linalg.qr(rng.standard_normal((d, K - 1)))
    centered_basis = helmert(K)  # (K-1, K), rows orthonormal and orthogonal to ones
    W = np.sqrt(K / (K - 1)) * frame @ centered_basis  # (d, K)
    return EtfClassifier(W.T)


@dataclass(frozen=True, eq=False)
class BoundaryNormal:
    class_a: int
    class_b: int
    vector: np.ndarray


def normal_coefficients(theta_ab, theta_ba, psi_angle):
    """Coefficients (a, b) of ``a*w_a + b*w_b`` for the boundary normal.

    Works elementwise on arrays. The normal is scaled by ``1 - cos^2 psi``
    and oriented so a positive inner product means "side of class a".
    """
    cos_psi = np.cos(psi_angle)
    sin_ab = np.sin(theta_ab)
    sin_ba = np.sin(theta_ba)
    return sin_ab + sin_ba * cos_psi, -(sin_ba + sin_ab * cos_psi)


def boundary_normal(etf, k, k_other, theta_k, theta_other):
    """Normal of the decision boundary between classes ``k`` and ``k_other``.

    ``theta_k`` is the boundary's angle from ``w_k``; the two angles must
    sum to psi.
    """
    if k == k_other:
        raise ContractError("boundary normal needs two distinct classes")
    p = etf.psi
    if abs(theta_k + theta_other - p) > ANGLE_SUM_TOL:
        raise ContractError(
            f"boundary angles must sum to psi={p!r}, got {theta_k!r} + {theta_other!r}"
        )
    if not (0.0 < theta_k < p and 0.0 < theta_other < p):
        raise ContractError("boundary angles must lie strictly between 0 and psi")
    a, b = normal_coefficients(theta_k, theta_other, p)
    vec = a * etf.weights[k] + b * etf.weights[k_other]
    return BoundaryNormal(k, k_other, vec)


def angle_between(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DomainError("angle with a zero vector is undefined")
    return float(np.arccos(np.clip(u @ v / (nu * nv), -1.0, 1.0)))
