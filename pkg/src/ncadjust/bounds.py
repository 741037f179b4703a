"""Angular bound probability and the boundary angles that maximize it.

The bound for class k reads

    Pi(theta; k) = 1 - (a_k / theta) * (b + B * sqrt(2 ln(r * theta / a_k)))

with a_k = (pi/2) r ||W1||_2 / (sqrt(n_k) ||mu_k||) and b = 4 C + 4 B + 1.
It is only asserted on the validity window (theta_lo, pi/2).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractError, ParameterError, WindowError
from .stats import ClassStats


@dataclass(frozen=True)
class ComplexityParams:
    rank_r: int
    spectral_norm_w1: float
    bound_B: float
    mean_complexity_C: float
    n_k: int
    mean_norm: float

    def __post_init__(self):
        if self.rank_r < 1 or int(self.rank_r) != self.rank_r:
            raise ParameterError(f"rank_r must be a positive integer, got {self.rank_r!r}")
        for name in ("spectral_norm_w1", "mean_complexity_C", "mean_norm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive and finite, got {v!r}")
        if not (math.isfinite(self.bound_B) and self.bound_B >= 1):
            raise ParameterError(f"bound_B must be >= 1, got {self.bound_B!r}")
        if self.n_k <= 2:
            raise ParameterError(f"the bound requires n_k > 2, got {self.n_k!r}")

    @property
    def alpha(self):
        return (math.pi / 2) * self.rank_r * self.spectral_norm_w1 / (
            math.sqrt(self.n_k) * self.mean_norm
        )

    @property
    def beta(self):
        return 4 * self.mean_complexity_C + 4 * self.bound_B + 1

    def with_class(self, n_k, mean_norm):
        """Same network constants, different class."""
        return ComplexityParams(
            self.rank_r, self.spectral_norm_w1, self.bound_B, self.mean_complexity_C, n_k, mean_norm
        )


@dataclass(frozen=True)
class ReluComplexityParams:
    depth_q: int
    frobenius_product_M: float
    input_sup_norm: float

    def __post_init__(self):
        for name in ("depth_q", "frobenius_product_M", "input_sup_norm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive, got {v!r}")


class Window(NamedTuple):
    lo: float
    hi: float

    @property
    def empty(self):
        return not self.lo < self.hi

    def contains(self, theta):
        return self.lo < theta < self.hi


def validity_window(params):
    p = params
    ratio = math.sqrt(p.n_k) * p.mean_norm / p.spectral_norm_w1
    if ratio <= 1:
        raise ParameterError(
            f"sqrt(n_k)*||mu|| = {ratio * p.spectral_norm_w1!r} must exceed ||W1||_2 = {p.spectral_norm_w1!r}"
        )
    lo = p.alpha * (
        4 * p.mean_complexity_C + 4 * p.bound_B + p.bound_B * math.sqrt(2 * math.log(ratio))
    )
    return Window(lo, math.pi / 2)


def angular_bound_probability(params, theta):
    window = validity_window(params)
    if not window.contains(theta):
        raise WindowError(
            f"theta={theta!r} outside validity window ({window.lo!r}, {window.hi!r})",
            window.lo,
            window.hi,
        )
    a = params.alpha
    log_arg = params.rank_r * theta / a
    # Inside the window log_arg >= r * (4C + 4B) >= 4.
    if log_arg <= 1:
        raise WindowError(f"log argument {log_arg!r} <= 1", window.lo, window.hi)
    value = 1.0 - (a / theta) * (params.beta + params.bound_B * math.sqrt(2 * math.log(log_arg)))
    if not 0.0 < value < 1.0:
        raise ContractError(f"bound {value!r} left (0, 1) at theta={theta!r}")
    return value


def optimal_pair_angle(n_k, norm_k, n_other, norm_other, psi, gamma=0.5):
    """Boundary angles (from w_k, from w_other) maximizing the pairwise bound.

    gamma = 1/2 is the square-root law; other values generalize it.
    """
    if min(n_k, n_other, norm_k, norm_other) <= 0:
        raise ParameterError("counts and norms must be positive")
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma!r}")
    weight_k = norm_k * float(n_k) ** gamma
    weight_other = norm_other * float(n_other) ** gamma
    theta_k = psi * weight_other / (weight_k + weight_other)
    return theta_k, psi - theta_k


@dataclass(frozen=True, eq=False)
class OptimalAngles:
    gamma: float
    class_stats: ClassStats
    angles: np.ndarray


def optimal_angle_matrix(stats, psi, gamma=0.5):
    """K x K matrix of optimal angles; entry (k, j) is measured from w_k, diagonal NaN."""
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma!r}")
    weight = stats.mean_norms * stats.counts.astype(np.float64) ** gamma
    angles = psi * weight[None, :] / (weight[:, None] + weight[None, :])
    np.fill_diagonal(angles, np.nan)
    return OptimalAngles(float(gamma), stats, angles)


def brute_force_pair_objective(params_k, params_other, psi, grid_step):
    """Grid maximizer of Pi(theta; k) + Pi(psi - theta; other).

    Scans theta = i * grid_step over the feasible interval; ties go to the
    smaller theta.
    """
    if grid_step <= 0:
        raise ParameterError("grid_step must be positive")
    wk = validity_window(params_k)
    wo = validity_window(params_other)
    lo = max(wk.lo, psi - wo.hi)
    hi = min(wk.hi, psi - wo.lo)
    i0 = math.floor(lo / grid_step) + 1
    i1 = math.ceil(hi / grid_step) - 1
    best_theta, best_value = None, -math.inf
    for i in range(i0, i1 + 1):
        theta = i * grid_step
        if not (wk.contains(theta) and wo.contains(psi - theta)):
            continue
        value = angular_bound_probability(params_k, theta) + angular_bound_probability(
            params_other, psi - theta
        )
        if value > best_value:
            best_theta, best_value = theta, value
    if best_theta is None:
        raise WindowError(f"no feasible grid point in ({lo!r}, {hi!r})", lo, hi)
    return best_theta, best_value


def relu_mean_complexity(params):
    """Mean complexity constant for a depth-q ReLU feature map."""
    return (1.5 * math.sqrt(params.depth_q) + 1) * params.frobenius_product_M * params.input_sup_norm


def relu_bound_B(params):
    return params.frobenius_product_M * params.input_sup_norm
