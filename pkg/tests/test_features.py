import math

import numpy as np
import pytest
from scipy import stats

from cqabench.errors import (ConfigError, NotFittedError, SchemaError,
                             UndefinedStatisticError)
from cqabench.features import (FE_TECHNIQUES, POWER_GRID,
                               LogTransform, NormaliseMinMaxTransform,
                               PowerTransform, StandardiseTransform, VifReport,
                               compute_vif, drop_composites,
                               fit_apply_transform, make_transform, pearson_r,
                               prune_by_vif)
from cqabench.schema import ColumnSpec, FeatureSchema, Role
from cqabench.table import UserFeatureTable


class TestStandardise:
    def test_three_point_example(self):
        out = StandardiseTransform().fit_transform(np.array([[1.], [2.], [3.]]))
        assert out.ravel() == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)

    def test_train_moments(self, rng):
        X = rng.lognormal(1, 1, (300, 4))
        out = StandardiseTransform().fit_transform(X)
        assert np.abs(out.mean(axis=0)).max() < 1e-10
        assert np.abs(out.std(axis=0) - 1).max() < 1e-10

    def test_zero_variance_warns_and_zeroes(self):
        X = np.array([[2.0, 1.0], [2.0, 2.0], [2.0, 3.0]])
        with pytest.warns(UserWarning, match="zero-variance"):
            t = StandardiseTransform().fit(X)
        out = t.transform(X)
        assert (out[:, 0] == 0).all()
        assert out[:, 1] != pytest.approx(0)


class TestNormalise:
    def test_three_point_example(self):
        out = NormaliseMinMaxTransform().fit_transform(
            np.array([[2.], [4.], [6.]]))
        assert out.ravel() == pytest.approx([0.0, 0.5, 1.0])

    def test_training_endpoints_attained(self, rng):
        X = rng.normal(0, 5, (100, 3))
        out = NormaliseMinMaxTransform().fit_transform(X)
        assert out.min(axis=0) == pytest.approx([0, 0, 0])
        assert out.max(axis=0) == pytest.approx([1, 1, 1])

    def test_eval_rows_may_exit_unit_interval(self):
        t = NormaliseMinMaxTransform().fit(np.array([[0.], [10.]]))
        assert t.transform(np.array([[20.]]))[0, 0] == pytest.approx(2.0)

    def test_constant_column_warns(self):
        with pytest.warns(UserWarning, match="constant"):
            out = NormaliseMinMaxTransform().fit_transform(
                np.array([[5.0], [5.0]]))
        assert (out == 0).all()


class TestLog:
    def test_reduces_skewness(self, rng):
        X = rng.lognormal(0, 1.2, (2000, 1))
        out = LogTransform().fit_transform(X)
        assert abs(stats.skew(out.ravel())) < abs(stats.skew(X.ravel()))

    def test_shift_keeps_argument_at_least_one(self):
        X = np.array([[-4.0], [0.0], [3.0]])
        t = LogTransform().fit(X)
        assert t.shift_[0] == -4.0
        assert t.transform(X).min() >= 0.0  # ln(1) at the training minimum

    def test_rank_preserved(self, rng):
        X = rng.normal(0, 10, (200, 2))
        out = LogTransform().fit_transform(X)
        for j in range(2):
            assert np.array_equal(np.argsort(out[:, j]), np.argsort(X[:, j]))


class TestPower:
    def test_exponent_from_grid_minimises_skewness(self, rng):
        X = rng.lognormal(0, 1, (1500, 1))
        t = PowerTransform().fit(X)
        chosen = float(t.exponent_[0])
        assert chosen in POWER_GRID
        chosen_skew = abs(stats.skew(t.transform(X).ravel()))
        shifted = 1.0 + X - t.shift_
        for p in POWER_GRID:
            alt = np.log(shifted) if p == 0 else (shifted**p - 1.0) / p
            assert chosen_skew <= abs(stats.skew(alt.ravel())) + 1e-12

    def test_rank_preserved_for_every_exponent(self, rng):
        # The shifted power map is strictly increasing even for p < 0.
        X = rng.normal(0, 3, (100, len(POWER_GRID)))
        t = PowerTransform().fit(X)
        out = t.transform(X)
        for j in range(X.shape[1]):
            assert np.array_equal(np.argsort(out[:, j]), np.argsort(X[:, j]))


class TestLeakage:
    @pytest.mark.parametrize("kind", FE_TECHNIQUES)
    def test_eval_rows_never_touch_fitted_params(self, kind, rng):
        train = rng.lognormal(0, 1, (80, 3))
        eval_a = rng.normal(0, 1, (40, 3))
        eval_b = eval_a + 100.0
        _, _, params_a = fit_apply_transform(kind, train, eval_a)
        _, _, params_b = fit_apply_transform(kind, train, eval_b)
        assert set(params_a) == set(params_b)
        for key in params_a:
            assert np.array_equal(params_a[key], params_b[key])

    def test_identity_passthrough(self, rng):
        X = rng.normal(0, 1, (10, 2))
        tr, ev, params = fit_apply_transform("none", X, X * 2)
        assert np.array_equal(tr, X)
        assert np.array_equal(ev, X * 2)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            make_transform("quantile")

    def test_transform_before_fit(self):
        with pytest.raises(NotFittedError):
            StandardiseTransform().transform(np.zeros((2, 2)))


class TestPearson:
    def test_exact_linearity(self):
        assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pearson_r([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0)

    def test_hand_computed_value(self):
        assert pearson_r([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9819, abs=1e-4)

    def test_constant_input(self):
        with pytest.raises(UndefinedStatisticError):
            pearson_r([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(UndefinedStatisticError):
            pearson_r([1, 2], [1, 2, 3])


class TestVif:
    def test_orthogonal_columns(self):
        n = 64
        base = np.arange(n)
        X = np.column_stack([
            np.where(base % 2 == 0, 1.0, -1.0),
            np.where(base % 4 < 2, 1.0, -1.0),
            np.where(base % 8 < 4, 1.0, -1.0),
        ])
        report = compute_vif(X, ["a", "b", "c"])
        for value in report.entries.values():
            assert value == pytest.approx(1.0, abs=1e-9)

    def test_exact_dependence_is_infinite(self, rng):
        A = rng.normal(0, 1, 50)
        B = rng.normal(0, 1, 50)
        X = np.column_stack([A, B, A + B])
        report = compute_vif(X, ["A", "B", "C"])
        assert math.isinf(report.entries["C"])

    def test_matches_independent_regression_oracle(self, rng):
        # Oracle route: the inverse-correlation-matrix identity.
        for _ in range(50):
            X = rng.normal(0, 1, (60, 4))
            X[:, 3] = 0.7 * X[:, 0] + 0.5 * X[:, 1] + rng.normal(0, 0.6, 60)
            report = compute_vif(X, list("abcd"))
            Z = (X - X.mean(axis=0)) / X.std(axis=0)
            expected = np.diag(np.linalg.inv(np.corrcoef(Z, rowvar=False)))
            got = np.array(list(report.entries.values()))
            assert np.allclose(got, expected, rtol=1e-8)

    def test_preconditions(self):
        with pytest.raises(SchemaError):
            compute_vif(np.zeros((10, 1)), ["a"])
        with pytest.raises(SchemaError):
            compute_vif(np.zeros((3, 4)), list("abcd"))


RQ1_VIF = {
    "Post Attention to Detail": 29.172, "Post Readability": 21.041,
    "Badges": 10.332, "User Contribution Frequency": 8.216,
    "Reputation": 7.188, "YearlyDurationUsage": 4.350,
    "User Profile Completion Rate": 3.213, "Questions": 3.063,
    "Comments": 2.512, "Edits": 2.093, "About Me Polarity": 1.865,
    "ProfileLength": 1.840, "Views": 1.787, "UpVotes": 1.772,
    "User Popularity Index": 1.730, "Comment Polarity": 1.558,
    "Answer Polarity": 1.452, "Question Polarity": 1.357,
    "Code Length": 1.347, "DownVotes": 1.257,
}

RQ3_VIF_OVER_5 = {
    "Post Attention to Detail": 29.310, "Post Readability": 21.049,
    "Badges": 11.354, "Reputation": 8.948,
    "Java Performance Violation Density": 8.863,
    "User Contribution Frequency": 8.584,
    "Java Security Violation Density": 8.574,
}


class TestPruneRule:
    def test_published_screening_values_remove_exactly_five(self):
        report = VifReport(dict(RQ1_VIF), threshold=5.0)
        removed = set(report.over_threshold())
        assert removed == {
            "Post Attention to Detail", "Post Readability", "Badges",
            "User Contribution Frequency", "Reputation",
        }
        assert len(RQ1_VIF) - len(removed) == 15

    def test_larger_screening_keeps_thirty_four(self):
        entries = {f"keep{i}": 1.0 + i / 100 for i in range(34)}
        entries.update(RQ3_VIF_OVER_5)
        report = VifReport(entries, threshold=5.0)
        assert set(report.over_threshold()) == set(RQ3_VIF_OVER_5)
        assert len(entries) - 7 == 34

    def test_threshold_is_strict(self):
        report = VifReport({"edge": 5.0, "over": 5.0001}, threshold=5.0)
        assert report.over_threshold() == ["over"]

    def test_nothing_over_threshold(self):
        report = VifReport({"a": 1.2, "b": 4.9})
        assert report.over_threshold() == []


def _screening_table(rng):
    A = rng.normal(0, 1, 80)
    B = rng.normal(0, 1, 80)
    noisy = 0.995 * A + 0.01 * rng.normal(0, 1, 80)  # collinear with A
    target = A + B + rng.normal(0, 1, 80)
    schema = FeatureSchema((
        ColumnSpec("A"), ColumnSpec("B"), ColumnSpec("NoisyA"),
        ColumnSpec("Sum", Role.EXCLUDED_COMPOSITE),
        ColumnSpec("y", Role.TARGET, frozenset({"RQ1"})),
    ))
    values = np.column_stack([A, B, noisy, A + B, target])
    return UserFeatureTable(schema, values, np.zeros_like(values, dtype=bool))


class TestPruneByVif:
    def test_single_pass_drop(self, rng):
        table = drop_composites(_screening_table(rng))
        reduced, report, removed = prune_by_vif(table, threshold=5.0)
        assert set(removed) == {"A", "NoisyA"}
        assert "B" in reduced.schema.names
        assert "y" in reduced.schema.names  # targets are never assessed
        assert "y" not in report.entries

    def test_all_removed_is_error(self, rng):
        table = drop_composites(_screening_table(rng))
        with pytest.raises(ConfigError):
            prune_by_vif(table, threshold=1.0 + 1e-9)


class TestDropComposites:
    def test_flagged_columns_removed_addends_stay(self, rng):
        table = _screening_table(rng)
        out = drop_composites(table)
        assert "Sum" not in out.schema.names
        assert {"A", "B"} <= set(out.schema.names)

    def test_empty_rules_noop(self, rng):
        table = _screening_table(rng)
        out = drop_composites(table, rules=[])
        assert out.schema.names == table.schema.names

    def test_schema_without_composites_unchanged(self, rng):
        table = drop_composites(_screening_table(rng))
        again = drop_composites(table)
        assert again.schema.names == table.schema.names

    def test_unknown_rule_column(self, rng):
        with pytest.raises(SchemaError):
            drop_composites(_screening_table(rng), rules=["Ghost"])
