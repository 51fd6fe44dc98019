import math

import pytest

from cqabench.errors import ConfigError, OptimizationError
from cqabench.hpo import (AgreementReport, Boolean, Categorical, Continuous,
                          Integer, SearchSpace, TunedCell, agreement_check,
                          ga_optimize, refine_top_k, tpe_optimize)


def _random_space(rng) -> SearchSpace:
    params = {}
    n = int(rng.integers(1, 5))
    for i in range(n):
        kind = int(rng.integers(4))
        if kind == 0:
            lo = float(rng.uniform(-5, 0))
            params[f"c{i}"] = Continuous(lo, lo + float(rng.uniform(0.5, 9)))
        elif kind == 1:
            params[f"g{i}"] = Continuous(10.0**rng.integers(-4, 0),
                                         10.0**rng.integers(1, 3), log=True)
        elif kind == 2:
            lo = int(rng.integers(0, 10))
            params[f"i{i}"] = Integer(lo, lo + int(rng.integers(2, 50)))
        else:
            params[f"k{i}"] = Categorical(("a", "b", "c"))
    return SearchSpace(params)


class TestSearchSpace:
    def test_domain_validation(self):
        with pytest.raises(ConfigError):
            Continuous(1.0, 1.0)
        with pytest.raises(ConfigError):
            Continuous(0.0, 1.0, log=True)
        with pytest.raises(ConfigError):
            Integer(5, 5)
        with pytest.raises(ConfigError):
            Categorical(())

    def test_midpoint(self):
        space = SearchSpace({
            "lin": Continuous(0.0, 10.0),
            "log": Continuous(1e-2, 1e2, log=True),
            "int": Integer(1, 9),
            "cat": Categorical(("x", "y")),
            "flag": Boolean(True),
        })
        mid = space.midpoint()
        assert mid == {"lin": 5.0, "log": pytest.approx(1.0), "int": 5,
                       "cat": "x", "flag": True}

    def test_samples_stay_inside(self, rng):
        for _ in range(30):
            space = _random_space(rng)
            for _ in range(20):
                assert space.contains(space.sample(rng))


class TestTpe:
    def test_one_dimensional_quadratic(self):
        space = SearchSpace({"x": Continuous(0.0, 10.0)})
        result = tpe_optimize(lambda a: (a["x"] - 3.0) ** 2, space, 100,
                              seed=42)
        assert abs(result.best_params["x"] - 3.0) < 0.2

    def test_categorical_enumeration(self):
        table = {"a": 3.0, "b": 1.0, "c": 2.0, "d": 5.0}
        space = SearchSpace({"choice": Categorical(tuple(table))})
        result = tpe_optimize(lambda a: table[a["choice"]], space, 50, seed=1)
        assert result.best_params["choice"] == "b"

    def test_single_trial(self):
        space = SearchSpace({"x": Continuous(0.0, 1.0)})
        result = tpe_optimize(lambda a: a["x"], space, 1, seed=0)
        assert len(result.trials) == 1
        assert result.best_params == result.trials[0].assignment

    def test_results_stay_inside_space(self, rng):
        for _ in range(10):
            space = _random_space(rng)
            result = tpe_optimize(lambda a: sum(hash(str(v)) % 97
                                                for v in a.values()),
                                  space, 30, seed=int(rng.integers(1e6)))
            for trial in result.trials:
                assert space.contains(trial.assignment)

    def test_best_trace_monotone(self):
        space = SearchSpace({"x": Continuous(0.0, 1.0)})
        result = tpe_optimize(lambda a: a["x"], space, 60, seed=3)
        trace = result.best_trace()
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_failed_trials_excluded(self):
        space = SearchSpace({"x": Continuous(0.0, 10.0)})

        def objective(a):
            if a["x"] > 5.0:
                raise RuntimeError("boom")
            return (a["x"] - 3.0) ** 2

        result = tpe_optimize(objective, space, 80, seed=5)
        assert any(not t.ok for t in result.trials)
        assert result.best_params["x"] <= 5.0
        assert abs(result.best_params["x"] - 3.0) < 0.3

    def test_all_failed_raises(self):
        space = SearchSpace({"x": Continuous(0.0, 1.0)})

        def objective(a):
            raise RuntimeError("always")

        with pytest.raises(OptimizationError):
            tpe_optimize(objective, space, 5, seed=0)

    def test_deterministic(self):
        space = SearchSpace({"x": Continuous(0.0, 10.0),
                             "k": Categorical(("p", "q"))})

        def objective(a):
            return (a["x"] - 7) ** 2 + (a["k"] == "p")

        r1 = tpe_optimize(objective, space, 40, seed=11)
        r2 = tpe_optimize(objective, space, 40, seed=11)
        assert [t.assignment for t in r1.trials] == \
            [t.assignment for t in r2.trials]

    def test_consistency_of_best(self):
        space = SearchSpace({"x": Continuous(-1.0, 1.0)})
        result = tpe_optimize(lambda a: math.sin(5 * a["x"]), space, 50,
                              seed=2)
        ok_values = [t.value for t in result.trials if t.ok]
        assert result.best_objective == min(ok_values)
        assert len(result.trials) <= result.budget_used


class TestGa:
    def test_sphere(self):
        space = SearchSpace({f"x{i}": Continuous(0.0, 10.0) for i in range(5)})

        def sphere(a):
            return sum((a[f"x{i}"] - 5.0) ** 2 for i in range(5))

        result = ga_optimize(sphere, space, population=20, generations=25,
                             seed=42)
        assert result.best_objective < 1.25  # 1% of the objective range

    def test_two_individuals_one_generation(self):
        space = SearchSpace({"x": Continuous(0.0, 1.0)})
        result = ga_optimize(lambda a: a["x"], space, population=2,
                             generations=1, seed=0)
        ok_values = [t.value for t in result.trials if t.ok]
        assert result.best_objective == min(ok_values)

    def test_deterministic(self):
        space = SearchSpace({"x": Continuous(0.0, 10.0), "n": Integer(1, 50)})

        def objective(a):
            return (a["x"] - 2) ** 2 + abs(a["n"] - 25)

        r1 = ga_optimize(objective, space, 10, 5, seed=4)
        r2 = ga_optimize(objective, space, 10, 5, seed=4)
        assert [t.assignment for t in r1.trials] == \
            [t.assignment for t in r2.trials]

    def test_population_floor(self):
        space = SearchSpace({"x": Continuous(0.0, 1.0)})
        with pytest.raises(ConfigError):
            ga_optimize(lambda a: a["x"], space, population=1, generations=1,
                        seed=0)

    def test_results_stay_inside_space(self, rng):
        for _ in range(10):
            space = _random_space(rng)
            result = ga_optimize(lambda a: sum(hash(str(v)) % 89
                                               for v in a.values()),
                                 space, population=6, generations=3,
                                 seed=int(rng.integers(1e6)))
            for trial in result.trials:
                assert space.contains(trial.assignment)


BO_TABLE16 = {"booster": "gbtree", "max_depth": 10, "subsample": 0.474,
              "learning_rate": 0.301, "n_estimators": 1199,
              "reg_alpha": 0.259, "reg_lambda": 77}
GA_TABLE16 = {"booster": "gbtree", "max_depth": 10, "subsample": 0.465,
              "learning_rate": 0.294, "n_estimators": 1255,
              "reg_alpha": 0.258, "reg_lambda": 79}


class TestAgreement:
    def test_published_winning_rows_reproduce(self):
        report = agreement_check(BO_TABLE16, GA_TABLE16)
        assert round(report.per_param["n_estimators"].diff_percent, 3) == 4.671
        assert round(report.per_param["reg_lambda"].diff_percent, 3) == 2.597
        assert round(report.per_param["reg_alpha"].diff_percent, 3) == 0.386
        assert report.per_param["max_depth"].diff_percent == 0.0
        assert report.per_param["booster"].diff_percent is None
        assert report.passed
        assert report.denominator == "bo"

    def test_ten_percent_fails(self):
        report = agreement_check({"n": 100}, {"n": 110})
        assert report.per_param["n"].diff_percent == pytest.approx(10.0)
        assert not report.passed

    def test_mismatched_names(self):
        with pytest.raises(ConfigError):
            agreement_check({"a": 1}, {"b": 1})

    def test_categorical_and_boolean_equality(self):
        ok = agreement_check({"k": "rbf", "b": True}, {"k": "rbf", "b": True})
        assert ok.passed
        bad = agreement_check({"k": "rbf"}, {"k": "poly"})
        assert not bad.passed
        assert bad.per_param["k"].diff_percent is None

    def test_zero_reference_fallback(self):
        report = agreement_check({"x": 0.0}, {"x": 0.0003})
        assert report.per_param["x"].diff_percent == pytest.approx(0.03)
        assert report.passed


def _quadratic_cells(n):
    cells = []
    for i in range(n):
        center = 3.0 + 0.5 * i
        cells.append((f"cell{i}", center))
    return cells


class TestRefineTopK:
    def _tuned(self, seed=0):
        tuned = []
        for name, center in _quadratic_cells(10):
            space = SearchSpace({"x": Continuous(0.0, 10.0)})
            result = tpe_optimize(lambda a, c=center: (a["x"] - c) ** 2,
                                  space, 100, seed=seed + hash(name) % 100)
            tuned.append(TunedCell(name, result.best_objective,
                                   result.best_params, space))
        return tuned

    def test_selects_k_best(self):
        tuned = self._tuned()
        ranked = sorted(tuned, key=lambda c: c.objective_value)

        def factory(cell):
            center = dict(_quadratic_cells(10))[cell]
            return lambda a: (a["x"] - center) ** 2

        outcomes = refine_top_k(tuned, factory, k=5, seed=7)
        assert len(outcomes) == 5
        assert {o.cell for o in outcomes} == {c.cell for c in ranked[:5]}

    def test_k_larger_than_cells_warns(self):
        tuned = self._tuned()[:3]

        def factory(cell):
            center = dict(_quadratic_cells(10))[cell]
            return lambda a: (a["x"] - center) ** 2

        with pytest.warns(UserWarning, match="validating all"):
            outcomes = refine_top_k(tuned, factory, k=9, seed=7)
        assert len(outcomes) == 3

    def test_convex_objective_passes_margin(self):
        # Both optimisers land near each centre, so every report agrees
        # within the 5% margin.
        tuned = self._tuned(seed=50)

        def factory(cell):
            center = dict(_quadratic_cells(10))[cell]
            return lambda a: (a["x"] - center) ** 2

        outcomes = refine_top_k(tuned, factory, k=5, seed=50)
        for outcome in outcomes:
            assert isinstance(outcome.report, AgreementReport)
            assert outcome.report.passed

    def test_empty_input(self):
        with pytest.raises(ConfigError):
            refine_top_k([], lambda c: lambda a: 0.0)
