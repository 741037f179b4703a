"""Accuracy reports, boundary-angle heatmaps and hyperparameter sweeps."""

import math
from dataclasses import dataclass, field

import numpy as np

from .adjusters import (
    AdjustmentSpec,
    Method,
    ala_boundary_angle,
    ala_gap_and_gamma_star,
    boundary_angle_from_factors,
    classify,
    mla_boundary_angle,
    mla_factors,
)
from .bounds import optimal_angle_matrix
from .errors import ConfigError, ContractError
from .etf import psi as etf_psi
from .simulator import Kind


@dataclass(frozen=True)
class GroupThresholds:
    """Many: n_k > many_min; Medium: medium_min <= n_k <= many_min; Few: the rest."""

    many_min: int = 1000
    medium_min: int = 200

    def __post_init__(self):
        if not self.many_min > self.medium_min >= 1:
            raise ConfigError("group thresholds need many_min > medium_min >= 1")

    def groups(self, counts):
        counts = np.asarray(counts)
        many = counts > self.many_min
        medium = (counts >= self.medium_min) & ~many
        return {"many": many, "medium": medium, "few": ~(many | medium)}


THRESHOLD_PRESETS = {
    "cifar100lt": GroupThresholds(1000, 200),
    "cifar10lt": GroupThresholds(100, 20),
}


@dataclass
class EvalReport:
    overall: float
    groups: dict
    per_class: np.ndarray
    method: str
    gamma: float
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "method": self.method,
            "gamma": self.gamma,
            "overall": _json_float(self.overall),
            "groups": {k: _json_float(v) for k, v in self.groups.items()},
            "per_class": [_json_float(v) for v in self.per_class.tolist()],
        }
        out.update(self.extra)
        return out


def _json_float(v):
    return None if math.isnan(v) else float(v)


def accuracy_report(labels, predictions, counts, thresholds, method, gamma):
    K = len(counts)
    labels = np.asarray(labels)
    hits = np.bincount(labels, weights=(predictions == labels), minlength=K)
    totals = np.bincount(labels, minlength=K)
    if np.any(totals == 0):
        raise ContractError("every class needs at least one test sample")
    per_class = hits / totals
    groups = {}
    for name, mask in thresholds.groups(counts).items():
        groups[name] = float(per_class[mask].mean()) if mask.any() else math.nan
    return EvalReport(float(per_class.mean()), groups, per_class, str(method), float(gamma))


def evaluate(test, etf, spec, stats, thresholds=GroupThresholds()):
    """Classify every row of ``test`` under ``spec`` and aggregate accuracies.

    Overall accuracy is the unweighted mean of per-class accuracies.
    """
    if test.kind is Kind.TRAIN:
        raise ContractError("evaluate expects a test or validation split")
    if test.feature_dim != etf.feature_dim or test.num_classes != etf.num_classes:
        raise ContractError("test features do not match the classifier dimensions")
    if stats.num_classes != etf.num_classes:
        raise ContractError("class stats do not match the classifier")
    pred = classify(test.features, etf, spec, stats)
    return accuracy_report(
        test.labels, pred, stats.counts, thresholds, spec.method.value, spec.gamma
    )


def decision_agreement(features, etf, spec_a, spec_b, stats):
    """Fraction of rows on which two adjustment specs predict the same class."""
    a = classify(features, etf, spec_a, stats)
    b = classify(features, etf, spec_b, stats)
    return float(np.mean(a == b))


# Boundary matrices: entry (k, j) is the boundary angle measured from w_k, diagonal NaN.


def mla_angle_matrix(stats, gamma, exact=False):
    K = stats.num_classes
    p = etf_psi(K)
    n = stats.counts
    out = np.full((K, K), np.nan)
    kappa = mla_factors(stats, gamma) if exact else None
    for k in range(K):
        for j in range(K):
            if k == j:
                continue
            if exact:
                out[k, j] = boundary_angle_from_factors(kappa[k], kappa[j], p)
            else:
                out[k, j] = mla_boundary_angle(n[k], n[j], p, gamma)
    return out


def ala_angle_matrix(stats, gamma, f_norm):
    K = stats.num_classes
    p = etf_psi(K)
    n = stats.counts
    out = np.full((K, K), np.nan)
    for k in range(K):
        for j in range(K):
            if k != j:
                out[k, j] = ala_boundary_angle(n[k], n[j], p, gamma, f_norm)
    return out


def boundary_heatmaps(stats, gamma_1v1, gamma_mla, gamma_ala=None, f_norm=None, exact=False):
    """Angle differences (MLA - optimal, ALA - optimal) in radians.

    ``gamma_ala`` defaults to the tangent-matched scale for this K and
    ``f_norm`` to the mean of the class mean-feature norms. NaN marks
    undefined ALA boundaries and the diagonal.
    """
    K = stats.num_classes
    p = etf_psi(K)
    if gamma_ala is None:
        gamma_ala = ala_gap_and_gamma_star(p)[1]
    if f_norm is None:
        f_norm = float(np.mean(stats.mean_norms))
    theta_star = optimal_angle_matrix(stats, p, gamma_1v1).angles
    delta_mla = mla_angle_matrix(stats, gamma_mla, exact=exact) - theta_star
    delta_ala = ala_angle_matrix(stats, gamma_ala, f_norm) - theta_star
    return delta_mla, delta_ala


def format_matrix_csv(matrix):
    lines = []
    for row in np.asarray(matrix, dtype=np.float64):
        lines.append(",".join("NaN" if math.isnan(v) else repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_matrix_csv(path, matrix):
    with open(path, "w") as fh:
        fh.write(format_matrix_csv(matrix))


def default_gamma_grid():
    """{0.00, 0.05, ..., 2.00}."""
    return [round(0.05 * i, 2) for i in range(41)]


@dataclass
class SweepResult:
    method: str
    gammas: list
    reports: list
    agreement: list
    best_gamma: float


def sweep(test, etf, method, stats, gamma_grid=None, thresholds=GroupThresholds()):
    """Evaluate ``method`` at every gamma; the best gamma maximizes overall accuracy.

    Ties go to the smallest gamma. Each point also records how often MLA
    and the one-vs-one adjuster agree at that gamma.
    """
    grid = default_gamma_grid() if gamma_grid is None else [float(g) for g in gamma_grid]
    if not grid:
        raise ConfigError("gamma grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("gamma grid must be strictly increasing")
    method = Method(method)
    reports, agreement = [], []
    for g in grid:
        reports.append(evaluate(test, etf, AdjustmentSpec(method, g), stats, thresholds))
        agreement.append(
            decision_agreement(
                test.features,
                etf,
                AdjustmentSpec(Method.MLA, g),
                AdjustmentSpec(Method.ONE_VS_ONE, g),
                stats,
            )
        )
    overall = [r.overall for r in reports]
    best = grid[int(np.argmax(overall))]
    return SweepResult(method.value, grid, reports, agreement, best)
