import math

import numpy as np
import pytest

from ncadjust.adjusters import AdjustmentSpec, ala_gap_and_gamma_star
from ncadjust.bounds import optimal_angle_matrix
from ncadjust.errors import ConfigError, ContractError
from ncadjust.etf import build_etf, psi
from ncadjust.evaluation import (
    THRESHOLD_PRESETS,
    GroupThresholds,
    accuracy_report,
    ala_angle_matrix,
    boundary_heatmaps,
    decision_agreement,
    default_gamma_grid,
    evaluate,
    format_matrix_csv,
    mla_angle_matrix,
    sweep,
)
from ncadjust.simulator import LongTailProfile, ScenarioConfig, generate, make_counts
from ncadjust.stats import ClassStats

# Frozen from an independent closed-form evaluation over all pairs (n_1=500, rho=100, norms 10).
K100_MAX_MLA_GAP = 0.08273497617290598
K100_MAX_ALA_GAP = 0.5556009418332691
K10_MAX_MLA_GAP = 0.20018437524383845
EQUAL_COUNT_OFFSET_100 = -0.0101011818772557859


def long_tail_stats(K, n1=500, rho=100, norm=10.0):
    return ClassStats(make_counts(LongTailProfile(K, n1, rho)), np.full(K, norm))


@pytest.fixture(scope="module")
def small_scenario():
    K, d = 10, 12
    cfg = ScenarioConfig(LongTailProfile(K, 200, 50), d, spread_scale=6.0, test_per_class=40, seed=2)
    etf = build_etf(K, d, 0)
    train, test, stats = generate(cfg, etf)
    return etf, test, stats


class TestGroupThresholds:
    def test_membership(self):
        g = GroupThresholds(100, 20).groups([500, 100, 20, 19])
        assert g["many"].tolist() == [True, False, False, False]
        assert g["medium"].tolist() == [False, True, True, False]
        assert g["few"].tolist() == [False, False, False, True]

    def test_presets(self):
        assert THRESHOLD_PRESETS["cifar100lt"] == GroupThresholds()
        assert THRESHOLD_PRESETS["cifar10lt"] == GroupThresholds(100, 20)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            GroupThresholds(20, 20)


class TestEvaluate:
    def test_report_consistency(self, small_scenario):
        etf, test, stats = small_scenario
        th = GroupThresholds(100, 20)
        r = evaluate(test, etf, AdjustmentSpec("mla", 0.5), stats, th)
        assert abs(r.overall - r.per_class.mean()) <= 1e-12
        for name, mask in th.groups(stats.counts).items():
            assert abs(r.groups[name] - r.per_class[mask].mean()) <= 1e-12
        assert r.method == "mla" and r.gamma == 0.5

    def test_empty_group_is_nan(self, small_scenario):
        etf, test, stats = small_scenario
        r = evaluate(test, etf, AdjustmentSpec("baseline"), stats)
        assert math.isnan(r.groups["many"])
        assert r.to_dict()["groups"]["many"] is None

    def test_collapsed_scenario_is_perfect(self):
        cfg = ScenarioConfig(LongTailProfile(8, 100, 10), 9, spread_scale=1e-12, test_per_class=5)
        etf = build_etf(8, 9, 0)
        _, test, stats = generate(cfg, etf)
        assert evaluate(test, etf, AdjustmentSpec("baseline"), stats).overall == 1.0

    def test_equal_stats_all_methods_agree(self):
        K, d = 12, 14
        cfg = ScenarioConfig(LongTailProfile(K, 80, 1), d, spread_scale=25.0, test_per_class=30, seed=4)
        etf = build_etf(K, d, 3)
        _, test, stats = generate(cfg, etf)
        base = evaluate(test, etf, AdjustmentSpec("baseline"), stats)
        assert base.overall < 1.0
        for spec in (AdjustmentSpec("mla", 0.9), AdjustmentSpec("one_vs_one", 1.7)):
            r = evaluate(test, etf, spec, stats)
            np.testing.assert_array_equal(r.per_class, base.per_class)
            assert r.overall == base.overall
        assert decision_agreement(
            test.features, etf, AdjustmentSpec("mla", 0.3), AdjustmentSpec("one_vs_one", 0.3), stats
        ) == 1.0

    def test_rejects_train_split(self):
        cfg = ScenarioConfig(LongTailProfile(4, 10, 2), 4)
        etf = build_etf(4, 4, 0)
        train, _, stats = generate(cfg, etf)
        with pytest.raises(ContractError):
            evaluate(train, etf, AdjustmentSpec("baseline"), stats)

    def test_missing_test_class(self):
        with pytest.raises(ContractError):
            accuracy_report([0, 0], np.array([0, 0]), [3, 2], GroupThresholds(), "baseline", 0.0)


class TestAngleMatrices:
    def test_antisymmetry_identity(self):
        stats = long_tail_stats(30)
        p = psi(30)
        star = optimal_angle_matrix(stats, p, 0.5).angles
        off = ~np.eye(30, dtype=bool)
        np.testing.assert_allclose((star + star.T)[off], p, atol=1e-12)
        theta_mla = mla_angle_matrix(stats, 0.5)
        theta_ala = ala_angle_matrix(stats, 0.2, 10.0)
        d_mla, d_ala = boundary_heatmaps(stats, 0.5, 0.5, 0.2, 10.0)
        np.testing.assert_allclose((d_mla + d_mla.T)[off], (theta_mla + theta_mla.T)[off] - p, atol=1e-12)
        np.testing.assert_allclose(
            (d_ala + d_ala.T)[off], (theta_ala + theta_ala.T)[off] - p, atol=1e-12, equal_nan=True
        )

    def test_exact_matrix_sums_to_psi(self):
        stats = long_tail_stats(20)
        m = mla_angle_matrix(stats, 0.5, exact=True)
        off = ~np.eye(20, dtype=bool)
        np.testing.assert_allclose((m + m.T)[off], psi(20), atol=1e-12)

    def test_diagonals_are_nan(self):
        d_mla, d_ala = boundary_heatmaps(long_tail_stats(10), 0.5, 0.5)
        assert np.all(np.isnan(np.diag(d_mla))) and np.all(np.isnan(np.diag(d_ala)))
        assert np.all(np.isfinite(d_mla[~np.eye(10, dtype=bool)]))


class TestHeatmaps:
    def test_equal_stats_offset(self):
        d_mla, _ = boundary_heatmaps(ClassStats.equal(100, 50, 10.0), 0.5, 0.5)
        off = ~np.eye(100, dtype=bool)
        np.testing.assert_allclose(d_mla[off], EQUAL_COUNT_OFFSET_100, atol=1e-12)
        exact, _ = boundary_heatmaps(ClassStats.equal(100, 50, 10.0), 0.5, 0.5, exact=True)
        np.testing.assert_allclose(exact[off], 0.0, atol=1e-12)

    def test_k100_fixture(self):
        d_mla, d_ala = boundary_heatmaps(long_tail_stats(100), 0.5, 0.5, f_norm=10.0)
        assert np.nanmax(np.abs(d_mla)) == pytest.approx(K100_MAX_MLA_GAP, abs=1e-12)
        assert np.nanmax(np.abs(d_ala)) == pytest.approx(K100_MAX_ALA_GAP, abs=1e-12)
        assert np.nanmax(np.abs(d_ala)) > np.nanmax(np.abs(d_mla))
        # The extreme-count pair is not the worst pair.
        assert abs(d_mla[0, 99]) == pytest.approx(0.05405543074671636, abs=1e-12)

    def test_small_k_breakdown(self):
        d10, _ = boundary_heatmaps(long_tail_stats(10), 0.5, 0.5, f_norm=10.0)
        assert np.nanmax(np.abs(d10)) == pytest.approx(K10_MAX_MLA_GAP, abs=1e-12)
        assert np.nanmax(np.abs(d10)) > K100_MAX_MLA_GAP

    def test_nan_where_arcsin_undefined(self):
        stats = long_tail_stats(100)
        gamma, f = 1.0, 2.0
        _, d_ala = boundary_heatmaps(stats, 0.5, 0.5, gamma, f)
        p = psi(100)
        n = stats.counts.astype(float)
        arg = gamma * np.log(n[:, None] / n[None, :]) / (2 * f * math.sin(p / 2))
        undefined = np.abs(arg) > 1
        np.fill_diagonal(undefined, True)
        assert undefined.sum() > 100
        np.testing.assert_array_equal(np.isnan(d_ala), undefined)

    def test_default_ala_gamma(self):
        stats = long_tail_stats(10)
        a = boundary_heatmaps(stats, 0.5, 0.5)[1]
        b = boundary_heatmaps(stats, 0.5, 0.5, ala_gap_and_gamma_star(psi(10))[1], 10.0)[1]
        np.testing.assert_array_equal(a, b)

    def test_csv_format(self):
        text = format_matrix_csv(np.array([[np.nan, 0.1], [-0.25, np.nan]]))
        assert text == "NaN,0.1\n-0.25,NaN\n"


class TestSweep:
    def test_default_grid(self):
        g = default_gamma_grid()
        assert len(g) == 41 and g[0] == 0.0 and g[-1] == 2.0 and g[7] == 0.35

    def test_baseline_constant(self, small_scenario):
        etf, test, stats = small_scenario
        res = sweep(test, etf, "baseline", stats)
        assert len(res.reports) == 41
        assert all(np.array_equal(r.per_class, res.reports[0].per_class) for r in res.reports)
        assert res.best_gamma == 0.0

    def test_ties_to_smallest(self, small_scenario):
        etf, test, stats = small_scenario
        res = sweep(test, etf, "mla", stats, [0.0, 0.5, 1.0])
        overall = [r.overall for r in res.reports]
        assert res.best_gamma == [0.0, 0.5, 1.0][overall.index(max(overall))]

    def test_agreement_at_zero(self, small_scenario):
        etf, test, stats = small_scenario
        res = sweep(test, etf, "mla", stats, [0.0, 1.0])
        assert res.agreement[0] == 1.0
        assert 0.0 <= res.agreement[1] <= 1.0

    @pytest.mark.parametrize("grid", [[], [0.5, 0.5], [1.0, 0.2]])
    def test_invalid_grid(self, small_scenario, grid):
        etf, test, stats = small_scenario
        with pytest.raises(ConfigError):
            sweep(test, etf, "mla", stats, grid)
