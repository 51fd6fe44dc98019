"""The closed registry of the 21 benchmarked algorithms.

Nine entries are regression-only, three classification-only, and nine
serve both tasks. Every tunable hyperparameter reported for a model in the
benchmark's winning-configuration tables appears in that model's search
space; range bounds default to roughly twice the widest published optimum
for the parameter kind (estimator counts 1-2400, boosting learning rate
1e-3-1, tree depth 1-20, epoch caps to 2000, and so on).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from ..hpo import Boolean, Categorical, Continuous, Integer, SearchSpace

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class ModelSpec:
    name: str
    family: str
    tasks: frozenset[str]
    search_space: SearchSpace

    def supports(self, task: str) -> bool:
        return task in self.tasks


def _spec(name: str, family: str, tasks: tuple[str, ...],
          params: dict) -> ModelSpec:
    return ModelSpec(name, family, frozenset(tasks), SearchSpace(params))


_KERNELS = Categorical(("rbf", "linear", "poly", "sigmoid"))

_SVM_COMMON = {
    "C": Continuous(1e-2, 6.5, log=True),
    "kernel": _KERNELS,
    "degree": Integer(1, 4),
    "coef0": Continuous(0.0, 16.0),
    "max_iter": Integer(100, 2000),
}

_BAYES_PRIORS = {
    "max_iter": Integer(50, 2000),
    "alpha_1": Continuous(1e-6, 20.0, log=True),
    "alpha_2": Continuous(1e-6, 20.0, log=True),
    "lambda_1": Continuous(1e-6, 20.0, log=True),
    "lambda_2": Continuous(1e-6, 20.0, log=True),
}

_TREE_SHAPE = {
    "max_depth": Integer(1, 20),
    "min_samples_split": Continuous(0.01, 0.72),
    "min_samples_leaf": Continuous(0.001, 0.16),
}


def registry() -> list[ModelSpec]:
    """All 21 model specs in their benchmark-table order."""
    return [
        _spec("Ordinary Least Squares", "linear", (REGRESSION,), {
            "fit_intercept": Boolean(True),
        }),
        _spec("Logistic Regression", "linear", (CLASSIFICATION,), {
            "C": Continuous(1e-2, 6.5, log=True),
            "max_iter": Integer(50, 2000),
        }),
        _spec("ElasticNet", "linear", (REGRESSION,), {
            "alpha": Continuous(1e-4, 120.0, log=True),
            "l1_ratio": Continuous(0.0, 1.0),
        }),
        _spec("Ridge Classifier", "linear", (CLASSIFICATION,), {
            "alpha": Continuous(1e-4, 120.0, log=True),
        }),
        _spec("LassoLARS", "linear", (REGRESSION,), {
            "alpha": Continuous(1e-4, 120.0, log=True),
        }),
        _spec("Stochastic Gradient Descent", "linear",
              (REGRESSION, CLASSIFICATION), {
                  "alpha": Continuous(1e-4, 120.0, log=True),
                  "l1_ratio": Continuous(0.0, 1.0),
                  "max_iter": Integer(50, 2000),
                  # Above ~0.05 the squared-loss updates diverge on this
                  # library's scaling, so the range is stability-bounded
                  # rather than set by the 2x-widest-optimum rule.
                  "eta0": Continuous(1e-4, 0.05, log=True),
              }),
        _spec("Bayesian Ridge", "bayesian", (REGRESSION,), {
            **_BAYES_PRIORS,
            "compute_score": Boolean(False),
        }),
        _spec("Automatic Relevance Determination", "bayesian", (REGRESSION,),
              dict(_BAYES_PRIORS)),
        _spec("Huber", "outlier-robust", (REGRESSION,), {
            "epsilon": Continuous(1.0, 30.0),
            "alpha": Continuous(1e-4, 12.7, log=True),
            "max_iter": Integer(50, 2000),
        }),
        _spec("Theil-Sen", "outlier-robust", (REGRESSION,), {
            "max_subpopulation": Integer(500, 20000),
            "fit_intercept": Boolean(True),
        }),
        _spec("Epsilon Support Vector Machine", "support-vector",
              (REGRESSION,), {
                  **_SVM_COMMON,
                  "epsilon": Continuous(1e-3, 2.0),
              }),
        _spec("Nu Support Vector Machine", "support-vector", (REGRESSION,), {
            **_SVM_COMMON,
            "nu": Continuous(0.01, 1.0),
        }),
        _spec("Linear Support Vector Machine", "support-vector",
              (REGRESSION, CLASSIFICATION), {
                  "C": Continuous(1e-2, 6.5, log=True),
                  "epsilon": Continuous(0.0, 2.0),
                  "max_iter": Integer(100, 4000),
              }),
        _spec("C Support Vector Machine", "support-vector",
              (CLASSIFICATION,), dict(_SVM_COMMON)),
        _spec("Decision Tree", "tree", (REGRESSION, CLASSIFICATION),
              dict(_TREE_SHAPE)),
        _spec("Random Forest", "tree", (REGRESSION, CLASSIFICATION), {
            "n_estimators": Integer(1, 2400),
            **_TREE_SHAPE,
            "min_weight_fraction_leaf": Continuous(0.0, 0.31),
            "max_features": Continuous(0.01, 1.0),
            "max_samples": Continuous(0.01, 1.0),
            "oob_score": Boolean(False),
        }),
        _spec("Adaptive Boosting", "ensemble", (REGRESSION, CLASSIFICATION), {
            "n_estimators": Integer(1, 2400),
            "learning_rate": Continuous(1e-3, 1.0, log=True),
        }),
        _spec("Bagging", "ensemble", (REGRESSION, CLASSIFICATION), {
            "n_estimators": Integer(1, 2400),
            "max_samples": Continuous(0.005, 1.0),
            "max_features": Continuous(0.01, 1.0),
            "bootstrap": Boolean(True),
            "bootstrap_features": Boolean(False),
            "oob_score": Boolean(False),
        }),
        _spec("Extreme Gradient Boosting", "ensemble",
              (REGRESSION, CLASSIFICATION), {
                  "booster": Categorical(("gbtree",)),
                  "n_estimators": Integer(1, 2400),
                  "max_depth": Integer(1, 20),
                  "learning_rate": Continuous(1e-3, 1.0, log=True),
                  "subsample": Continuous(0.005, 1.0),
                  "reg_alpha": Continuous(1e-3, 1.05, log=True),
                  "reg_lambda": Continuous(1e-3, 178.0, log=True),
              }),
        _spec("K-Nearest Neighbours", "neighbours",
              (REGRESSION, CLASSIFICATION), {
                  "n_neighbors": Integer(1, 200),
                  "weights": Categorical(("uniform", "distance")),
                  "algorithm": Categorical(("auto", "ball_tree", "kd_tree",
                                            "brute")),
                  "leaf_size": Integer(1, 50),
                  "metric": Categorical(("minkowski", "euclidean",
                                         "manhattan")),
              }),
        _spec("Neural Network", "deep", (REGRESSION, CLASSIFICATION), {
            "learning_rate": Continuous(1e-4, 0.1, log=True),
            "epochs": Integer(10, 300),
        }),
    ]


def get_spec(name: str) -> ModelSpec:
    for spec in registry():
        if spec.name == name:
            return spec
    raise ConfigError(f"unknown model {name!r}")


def specs_for_task(task: str) -> list[ModelSpec]:
    if task not in (REGRESSION, CLASSIFICATION):
        raise ConfigError(f"unknown task {task!r}")
    return [spec for spec in registry() if spec.supports(task)]
