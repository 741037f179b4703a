import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from ncadjust.adjusters import AdjustmentSpec, classify
from ncadjust.errors import ContractError, ProfileError
from ncadjust.etf import angle_between, build_etf
from ncadjust.evaluation import evaluate
from ncadjust.simulator import (
    FeatureSet,
    Kind,
    LongTailProfile,
    ScenarioConfig,
    generate,
    generate_validation,
    make_counts,
)


def scenario(K=10, d=16, n1=200, rho=20, **kw):
    cfg = ScenarioConfig(LongTailProfile(K, n1, rho), d, **kw)
    return cfg, build_etf(K, d, 0)


class TestMakeCounts:
    def test_three_classes(self):
        np.testing.assert_array_equal(make_counts(LongTailProfile(3, 100, 100)), [100, 10, 1])

    def test_balanced(self):
        np.testing.assert_array_equal(make_counts(LongTailProfile(7, 42, 1)), np.full(7, 42))

    def test_hundred_classes(self):
        c = make_counts(LongTailProfile(100, 500, 100))
        assert c[0] == 500 and c[-1] == 5
        assert c[0] / c[-1] == 100

    def test_rounds_to_zero(self):
        with pytest.raises(ProfileError):
            make_counts(LongTailProfile(10, 1, 100))

    @pytest.mark.parametrize("K,n1,rho", [(2, 10, 1), (5, 0, 2), (5, 10, 0.5)])
    def test_preconditions(self, K, n1, rho):
        with pytest.raises(ProfileError):
            make_counts(LongTailProfile(K, n1, rho))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(3, 200), st.integers(100, 5000), st.floats(1, 100))
    def test_profile_shape(self, K, n1, rho):
        # Rounding keeps the realized ratio within 10% only while the tail keeps >= 5.5 samples.
        rho = min(rho, n1 / 5.5)
        c = make_counts(LongTailProfile(K, n1, rho))
        assert np.all(np.diff(c) <= 0)
        assert c[0] == n1
        assert abs(c[0] / c[-1] - rho) <= 0.1 * rho


class TestGenerate:
    def test_train_is_collapsed(self):
        cfg, etf = scenario(norm_multipliers=tuple(np.linspace(1, 2, 10)))
        train, _, stats = generate(cfg, etf)
        expected = cfg.class_norms[train.labels, None] * etf.weights[train.labels]
        np.testing.assert_array_equal(train.features, expected)
        np.testing.assert_allclose(stats.mean_norms, cfg.class_norms, rtol=1e-12)
        np.testing.assert_array_equal(stats.counts, cfg.counts)

    def test_conservation(self):
        cfg, etf = scenario(test_per_class=37)
        train, test, _ = generate(cfg, etf)
        assert len(train) == cfg.counts.sum()
        assert len(test) == 10 * 37
        np.testing.assert_array_equal(test.class_counts(), np.full(10, 37))
        assert train.kind is Kind.TRAIN and test.kind is Kind.TEST

    def test_deterministic(self):
        cfg, etf = scenario(seed=9, spread_scale=3.0)
        a, b = generate(cfg, etf), generate(cfg, etf)
        assert a[1].features.tobytes() == b[1].features.tobytes()
        assert a[0].features.tobytes() == b[0].features.tobytes()

    def test_seed_changes_test_split(self):
        cfg1, etf = scenario(seed=1)
        cfg2, _ = scenario(seed=2)
        assert not np.array_equal(generate(cfg1, etf)[1].features, generate(cfg2, etf)[1].features)

    def test_class_streams_are_independent(self):
        # Changing the test size of the run does not change the first rows of any class.
        cfg_a, etf = scenario(test_per_class=5, seed=4)
        cfg_b, _ = scenario(test_per_class=8, seed=4)
        ta, tb = generate(cfg_a, etf)[1], generate(cfg_b, etf)[1]
        for k in range(10):
            np.testing.assert_array_equal(
                ta.features[ta.labels == k], tb.features[tb.labels == k][:5]
            )

    def test_vanishing_spread_classifies_perfectly(self):
        cfg, etf = scenario(K=20, d=24, n1=300, rho=50, spread_scale=1e-12)
        _, test, stats = generate(cfg, etf)
        pred = classify(test.features, etf, AdjustmentSpec("baseline"), stats)
        np.testing.assert_array_equal(pred, test.labels)

    def test_spread_law(self):
        cfg, etf = scenario(K=10, d=64, n1=500, rho=10, spread_scale=0.5, test_per_class=200, seed=3)
        assert cfg.spread_scale / np.sqrt(cfg.counts[-1]) <= 0.3
        _, test, _ = generate(cfg, etf)
        for k in range(10):
            rows = test.features[test.labels == k]
            dev = np.mean([angle_between(x, etf.weights[k]) for x in rows])
            target = cfg.spread_scale / np.sqrt(cfg.counts[k])
            assert 1 / 1.3 <= dev / target <= 1.3

    def test_head_classes_are_tighter(self):
        K = 100
        cfg = ScenarioConfig(
            LongTailProfile(K, 500, 100), 128, 10.0, spread_scale=20.0, test_per_class=100, seed=1
        )
        etf = build_etf(K, 128, 0)
        train, test, stats = generate(cfg, etf)
        acc = evaluate(test, etf, AdjustmentSpec("baseline"), stats).per_class
        rho, _ = sps.spearmanr(np.arange(K), acc)
        assert rho <= 0
        diffs = acc[: K // 2] - acc[::-1][: K // 2]
        wins = int(np.sum(diffs > 0))
        trials = int(np.sum(diffs != 0))
        assert sps.binomtest(wins, trials, alternative="greater").pvalue < 0.01

    def test_jitter(self):
        cfg, etf = scenario(jitter=1e-3)
        train, _, _ = generate(cfg, etf)
        centers = cfg.class_norms[train.labels, None] * etf.weights[train.labels]
        assert 0 < np.max(np.abs(train.features - centers)) < 0.1

    def test_dimension_mismatch(self):
        cfg, _ = scenario(d=16)
        with pytest.raises(ContractError):
            generate(cfg, build_etf(10, 17, 0))


class TestValidation:
    def test_independent_of_test(self):
        cfg, etf = scenario(val_per_class=20, seed=5)
        _, test, _ = generate(cfg, etf)
        val = generate_validation(cfg, etf)
        assert val.kind is Kind.VALIDATION
        assert len(val) == 200
        assert not np.array_equal(val.features[:20], test.features[:20])

    def test_disabled(self):
        cfg, etf = scenario(val_per_class=0)
        with pytest.raises(ContractError):
            generate_validation(cfg, etf)


class TestScenarioConfig:
    def test_spreads(self):
        cfg, _ = scenario(spread_scale=2.0, mean_norm_base=5.0)
        np.testing.assert_allclose(cfg.spreads, 2.0 * 5.0 / np.sqrt(cfg.counts))

    @pytest.mark.parametrize(
        "kw", [dict(d=8), dict(spread_scale=0.0), dict(test_per_class=0), dict(jitter=-1.0)]
    )
    def test_invalid(self, kw):
        with pytest.raises(ContractError):
            scenario(**kw)


class TestFeatureSet:
    def test_label_out_of_range(self):
        with pytest.raises(ContractError):
            FeatureSet(np.zeros((2, 3)), [0, 3], Kind.TEST, 3)

    def test_non_finite(self):
        with pytest.raises(ContractError):
            FeatureSet(np.array([[np.inf, 0.0]]), [0], Kind.TEST, 2)

    def test_row_mismatch(self):
        with pytest.raises(ContractError):
            FeatureSet(np.zeros((2, 3)), [0], "train", 3)
