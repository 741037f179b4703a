"""Post-hoc decision-boundary adjustment for long-tailed classification on ETF classifiers."""

from .adjusters import (
    AdjustmentSpec,
    Method,
    adjust_logits,
    ala_boundary_angle,
    ala_gap_and_gamma_star,
    boundary_angle_from_factors,
    classify,
    mla_boundary_angle,
    mla_factors,
    phi,
)
from .bounds import (
    ComplexityParams,
    ReluComplexityParams,
    angular_bound_probability,
    brute_force_pair_objective,
    optimal_angle_matrix,
    optimal_pair_angle,
    relu_bound_B,
    relu_mean_complexity,
    validity_window,
)
from .etf import EtfClassifier, angle_between, boundary_normal, build_etf, psi
from .evaluation import EvalReport, GroupThresholds, boundary_heatmaps, evaluate, sweep
from .featio import ingest, read_binary, read_csv, write_binary, write_csv
from .simulator import (
    FeatureSet,
    LongTailProfile,
    ScenarioConfig,
    generate,
    generate_validation,
    make_counts,
)
from .stats import ClassStats

__version__ = "0.1.0"
