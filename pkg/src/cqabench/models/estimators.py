"""Fit/predict front end over the model registry.

All classical algorithms are backed by scikit-learn estimators behind the
registry contracts; the boosted-tree and network entries use the in-house
implementations. Kernel support-vector fits that cannot reach a finite
solution raise a structured non-convergence error so grid cells can be
reported N/A instead of aborting a whole benchmark.
"""

from __future__ import annotations

import pickle
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn import dummy, ensemble, linear_model, neighbors, svm, tree
from sklearn.exceptions import ConvergenceWarning

from ..errors import (ConfigError, NonConvergenceError, NotFittedError,
                      SchemaError, TaskError)
from ..hpo import Continuous, Integer, SearchSpace
from .boosting import BoostedTrees
from .network import FeedForwardNet, frozen_network, get_architecture
from .registry import CLASSIFICATION, REGRESSION, ModelSpec

MODEL_FORMAT = "cqabench-model"
MODEL_FORMAT_VERSION = 1

#: Kernel SVM entries whose failure to find finite dual coefficients is a
#: recognised, reportable outcome rather than a bug.
_KERNEL_SVMS = {
    "Epsilon Support Vector Machine",
    "Nu Support Vector Machine",
    "C Support Vector Machine",
}

_EMPTY_SPACE = SearchSpace({})


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    task: str
    estimator: object
    seed: int
    n_rows: int
    n_cols: int

    def is_classifier(self) -> bool:
        return self.task == CLASSIFICATION


def validate_params(spec: ModelSpec, params: dict) -> None:
    """Every supplied hyperparameter must exist in the spec's search space
    and lie inside its domain; omitted ones fall back to library defaults."""
    for name, value in params.items():
        if name not in spec.search_space.params:
            raise ConfigError(f"{spec.name}: unknown hyperparameter {name!r}")
        domain = spec.search_space.params[name]
        if isinstance(domain, Continuous):
            ok = domain.lo <= value <= domain.hi
        elif isinstance(domain, Integer):
            ok = isinstance(value, (int, np.integer)) and \
                domain.lo <= value <= domain.hi
        else:
            ok = value in domain.choices
        if not ok:
            raise ConfigError(
                f"{spec.name}: hyperparameter {name}={value!r} outside its "
                f"declared domain"
            )


def _network(params: dict, task: str, seed: int) -> FeedForwardNet:
    return FeedForwardNet(
        get_architecture(4), task, seed=seed,
        learning_rate=params.get("learning_rate"),
        epochs=params.get("epochs", 100),
    )


def _make_estimator(spec: ModelSpec, task: str, params: dict, seed: int):
    name, p = spec.name, dict(params)
    if name == "Ordinary Least Squares":
        return linear_model.LinearRegression(**p)
    if name == "Logistic Regression":
        return linear_model.LogisticRegression(random_state=seed, **p)
    if name == "ElasticNet":
        return linear_model.ElasticNet(random_state=seed, **p)
    if name == "Ridge Classifier":
        return linear_model.RidgeClassifier(**p)
    if name == "LassoLARS":
        return linear_model.LassoLars(**p)
    if name == "Stochastic Gradient Descent":
        common = dict(penalty="elasticnet", learning_rate="invscaling",
                      random_state=seed, **p)
        if task == REGRESSION:
            return linear_model.SGDRegressor(**common)
        return linear_model.SGDClassifier(loss="log_loss", **common)
    if name == "Bayesian Ridge":
        return linear_model.BayesianRidge(**p)
    if name == "Automatic Relevance Determination":
        return linear_model.ARDRegression(**p)
    if name == "Huber":
        return linear_model.HuberRegressor(**p)
    if name == "Theil-Sen":
        return linear_model.TheilSenRegressor(random_state=seed, **p)
    if name == "Epsilon Support Vector Machine":
        return svm.SVR(**p)
    if name == "Nu Support Vector Machine":
        return svm.NuSVR(**p)
    if name == "Linear Support Vector Machine":
        if task == REGRESSION:
            return svm.LinearSVR(random_state=seed, **p)
        p.pop("epsilon", None)
        return svm.LinearSVC(random_state=seed, **p)
    if name == "C Support Vector Machine":
        return svm.SVC(probability=False, random_state=seed, **p)
    if name == "Decision Tree":
        cls = tree.DecisionTreeRegressor if task == REGRESSION \
            else tree.DecisionTreeClassifier
        return cls(random_state=seed, **p)
    if name == "Random Forest":
        cls = ensemble.RandomForestRegressor if task == REGRESSION \
            else ensemble.RandomForestClassifier
        return cls(random_state=seed, **p)
    if name == "Adaptive Boosting":
        cls = ensemble.AdaBoostRegressor if task == REGRESSION \
            else ensemble.AdaBoostClassifier
        return cls(random_state=seed, **p)
    if name == "Bagging":
        cls = ensemble.BaggingRegressor if task == REGRESSION \
            else ensemble.BaggingClassifier
        return cls(random_state=seed, **p)
    if name == "Extreme Gradient Boosting":
        objective = "squared_error" if task == REGRESSION \
            else "binary_logistic"
        return BoostedTrees(objective=objective, random_state=seed, **p)
    if name == "K-Nearest Neighbours":
        cls = neighbors.KNeighborsRegressor if task == REGRESSION \
            else neighbors.KNeighborsClassifier
        return cls(**p)
    if name == "Neural Network":
        return _network(p, task, seed)
    raise ConfigError(f"no estimator factory for {name!r}")


def fit(spec: ModelSpec, params: dict, X: np.ndarray, y: np.ndarray,
        task: str, seed: int = 42) -> FittedModel:
    """Fit one registry model. Task applicability is enforced before any
    computation, and inputs must already be fully imputed."""
    if not spec.supports(task):
        raise TaskError(f"{spec.name} does not support {task}")
    validate_params(spec, params)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise SchemaError("X must be 2-D and aligned with y")
    if np.isnan(X).any():
        raise SchemaError("X still contains missing values; impute first")

    estimator = _make_estimator(spec, task, params, seed)
    if spec.name in _KERNEL_SVMS:
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            try:
                estimator.fit(X, y)
            except ConvergenceWarning as exc:
                raise NonConvergenceError(
                    f"{spec.name}: iteration cap reached before convergence "
                    f"({exc})"
                ) from None
        for attr in ("dual_coef_", "intercept_"):
            value = getattr(estimator, attr, None)
            if value is not None and not np.all(np.isfinite(value)):
                raise NonConvergenceError(
                    f"{spec.name}: non-finite {attr.rstrip('_')} on this input"
                )
    else:
        estimator.fit(X, y)
    return FittedModel(spec, task, estimator, seed, X.shape[0], X.shape[1])


def _scores_in_unit_interval(model: FittedModel, X: np.ndarray) -> np.ndarray:
    est = model.estimator
    if hasattr(est, "predict_proba"):
        return est.predict_proba(X)[:, -1]
    # Margin classifiers: squash the decision value into [0, 1].
    margin = est.decision_function(X)
    return 1.0 / (1.0 + np.exp(-margin))


def predict(model: FittedModel, X: np.ndarray):
    """Regression gives a real vector; classification gives (labels, scores)
    with every score inside [0, 1]."""
    if not isinstance(model, FittedModel):
        raise NotFittedError("predict expects a FittedModel")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or (model.n_cols is not None and X.shape[1] != model.n_cols):
        raise SchemaError(
            f"expected {model.n_cols} feature columns, got shape {X.shape}"
        )
    if model.task == REGRESSION:
        predictions = np.asarray(model.estimator.predict(X), dtype=np.float64)
        if not np.all(np.isfinite(predictions)):
            # A diverged fit (e.g. overflowed gradient steps) is a
            # non-convergence outcome, not a usable prediction vector.
            raise NonConvergenceError(
                f"{model.spec.name}: non-finite predictions"
            )
        return predictions
    labels = np.asarray(model.estimator.predict(X), dtype=np.float64)
    scores = np.clip(_scores_in_unit_interval(model, X), 0.0, 1.0)
    return labels, scores


def fit_dummy(task: str, y_train: np.ndarray, seed: int = 42) -> FittedModel:
    """The no-learning floor: training-mean regressor or modal-class
    classifier; deterministic and independent of the feature columns."""
    y = np.asarray(y_train, dtype=np.float64)
    if y.size == 0:
        raise SchemaError("cannot fit a baseline on an empty target")
    if task == REGRESSION:
        est = dummy.DummyRegressor(strategy="mean")
    elif task == CLASSIFICATION:
        est = dummy.DummyClassifier(strategy="most_frequent")
    else:
        raise TaskError(f"unknown task {task!r}")
    est.fit(np.zeros((y.size, 1)), y)
    spec = ModelSpec(f"Dummy ({task})", "baseline", frozenset((task,)),
                     _EMPTY_SPACE)
    return FittedModel(spec, task, est, seed, y.size, None)


def build_network(arch_id: int, task: str, seed: int = 42,
                  **train_kwargs) -> FittedModel:
    """Untrained network of one of the four registered architectures,
    wrapped so ``.estimator.fit`` trains it in place."""
    net = FeedForwardNet(get_architecture(arch_id), task, seed=seed,
                         **train_kwargs)
    spec = ModelSpec(f"Neural Network (architecture {arch_id})", "deep",
                     frozenset((task,)), _EMPTY_SPACE)
    return FittedModel(spec, task, net, seed, 0, None)


def frozen_network_baseline(arch_id: int, task: str, n_features: int,
                            seed: int = 42) -> FittedModel:
    net = frozen_network(get_architecture(arch_id), task, n_features, seed)
    spec = ModelSpec(f"Frozen Network (architecture {arch_id})", "baseline",
                     frozenset((task,)), _EMPTY_SPACE)
    return FittedModel(spec, task, net, seed, 0, n_features)


def save_model(model: FittedModel, path: str | Path) -> None:
    """Persist a fitted model to the versioned flat-file format."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "spec_name": model.spec.name,
        "task": model.task,
        "seed": model.seed,
        "n_rows": model.n_rows,
        "n_cols": model.n_cols,
        "estimator": model.estimator,
        "search_space": model.spec.search_space,
        "family": model.spec.family,
        "tasks": sorted(model.spec.tasks),
    }
    with Path(path).open("wb") as fh:
        pickle.dump(payload, fh)


def load_model(path: str | Path) -> FittedModel:
    with Path(path).open("rb") as fh:
        payload = pickle.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{path}: not a saved model file")
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise ConfigError(
            f"{path}: unsupported model format version {payload.get('version')}"
        )
    spec = ModelSpec(payload["spec_name"], payload["family"],
                     frozenset(payload["tasks"]), payload["search_space"])
    return FittedModel(spec, payload["task"], payload["estimator"],
                       payload["seed"], payload["n_rows"], payload["n_cols"])
