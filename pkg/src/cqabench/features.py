"""Feature engineering and multicollinearity screening.

The five engineering modes are small scikit-learn-style transformers: fit
learns per-column statistics on training rows only, transform applies them
to any matrix with the same columns, so evaluation data never leaks into
the fitted parameters. Screening covers pairwise correlation, variance
inflation factors, single-pass pruning, and composite-column removal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, NotFittedError, SchemaError, UndefinedStatisticError
from .table import UserFeatureTable

FE_TECHNIQUES = ("standardise", "normalise", "log", "power", "none")

#: Candidate exponents for the power transform; 0 means the log map.
POWER_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0, 2.0)


def _sample_skewness(x: np.ndarray) -> np.ndarray:
    """Per-column skewness m3 / m2^1.5 (0 where the column is constant)."""
    centered = x - x.mean(axis=0)
    m2 = np.mean(centered**2, axis=0)
    m3 = np.mean(centered**3, axis=0)
    safe = m2 > 0
    out = np.zeros(x.shape[1])
    out[safe] = m3[safe] / m2[safe] ** 1.5
    return out


class _ColumnTransform(BaseEstimator, TransformerMixin):
    """Shared fit bookkeeping for the per-column transforms."""

    def _check_fitted(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "n_features_"):
            raise NotFittedError(f"{type(self).__name__} used before fit")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise SchemaError(
                f"expected {self.n_features_} columns, got shape {X.shape}"
            )
        return X

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise SchemaError("training matrix must be 2-D and non-empty")
        self.n_features_ = X.shape[1]
        self._fit(X)
        return self

    def _fit(self, X: np.ndarray) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def fitted_params(self) -> dict[str, np.ndarray]:
        if not hasattr(self, "n_features_"):
            raise NotFittedError(f"{type(self).__name__} used before fit")
        return {
            k[:-1]: np.array(v)
            for k, v in vars(self).items()
            if k.endswith("_") and k != "n_features_"
        }


class StandardiseTransform(_ColumnTransform):
    """Centre to zero mean and unit standard deviation (training moments)."""

    def _fit(self, X: np.ndarray) -> None:
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        if np.any(self.scale_ == 0):
            warnings.warn("zero-variance column under standardisation; output 0")

    def transform(self, X):
        X = self._check_fitted(X)
        scale = np.where(self.scale_ == 0, 1.0, self.scale_)
        out = (X - self.mean_) / scale
        out[:, self.scale_ == 0] = 0.0
        return out


class NormaliseMinMaxTransform(_ColumnTransform):
    """Rescale to [0, 1] by the training extremes (evaluation rows may exit)."""

    def _fit(self, X: np.ndarray) -> None:
        self.min_ = X.min(axis=0)
        self.max_ = X.max(axis=0)
        if np.any(self.max_ == self.min_):
            warnings.warn("constant column under min-max normalisation; output 0")

    def transform(self, X):
        X = self._check_fitted(X)
        span = self.max_ - self.min_
        safe = np.where(span == 0, 1.0, span)
        out = (X - self.min_) / safe
        out[:, span == 0] = 0.0
        return out


class LogTransform(_ColumnTransform):
    """ln(1 + x - shift) with shift = min(0, training minimum), so training
    arguments stay >= 1; evaluation arguments are floored just above zero."""

    def _fit(self, X: np.ndarray) -> None:
        self.shift_ = np.minimum(0.0, X.min(axis=0))

    def transform(self, X):
        X = self._check_fitted(X)
        arg = 1.0 + X - self.shift_
        return np.log(np.maximum(arg, 1e-12))


class PowerTransform(_ColumnTransform):
    """Monotone power map with the exponent picked per column to minimise
    absolute skewness over a fixed candidate grid.

    Values are shifted to be >= 1 first (like the log transform), then
    mapped through (s^p - 1) / p, which is strictly increasing for every
    grid exponent; p = 0 degenerates to ln(s).
    """

    def _fit(self, X: np.ndarray) -> None:
        self.shift_ = np.minimum(0.0, X.min(axis=0))
        shifted = 1.0 + X - self.shift_
        exponents = np.empty(X.shape[1])
        for j in range(X.shape[1]):
            skews = [
                abs(float(_sample_skewness(self._apply(shifted[:, j:j + 1], p))[0]))
                for p in POWER_GRID
            ]
            exponents[j] = POWER_GRID[int(np.argmin(skews))]
        self.exponent_ = exponents

    @staticmethod
    def _apply(shifted: np.ndarray, p: float) -> np.ndarray:
        if p == 0.0:
            return np.log(shifted)
        return (shifted**p - 1.0) / p

    def transform(self, X):
        X = self._check_fitted(X)
        shifted = np.maximum(1.0 + X - self.shift_, 1e-12)
        out = np.empty_like(shifted)
        for j in range(shifted.shape[1]):
            out[:, j] = self._apply(shifted[:, j], float(self.exponent_[j]))
        return out


class IdentityTransform(_ColumnTransform):
    """No feature engineering at all."""

    def _fit(self, X: np.ndarray) -> None:
        pass

    def transform(self, X):
        return self._check_fitted(X).copy()


_TRANSFORMS = {
    "standardise": StandardiseTransform,
    "normalise": NormaliseMinMaxTransform,
    "log": LogTransform,
    "power": PowerTransform,
    "none": IdentityTransform,
}


def make_transform(kind: str) -> _ColumnTransform:
    try:
        return _TRANSFORMS[kind]()
    except KeyError:
        raise ConfigError(
            f"unknown feature-engineering technique {kind!r}; "
            f"expected one of {sorted(_TRANSFORMS)}"
        ) from None


def fit_apply_transform(kind: str, train: np.ndarray, eval_: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray, dict]:
    """Fit on training rows only, apply to both matrices, report the
    fitted per-column statistics."""
    transform = make_transform(kind).fit(train)
    return transform.transform(train), transform.transform(eval_), \
        transform.fitted_params()


def pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    """Product-moment correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise UndefinedStatisticError("inputs must be equal-length vectors")
    if x.size < 2:
        raise UndefinedStatisticError("need at least 2 observations")
    xc, yc = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    if denom == 0:
        raise UndefinedStatisticError("correlation undefined for constant input")
    return float(np.dot(xc, yc) / denom)


@dataclass(frozen=True)
class VifReport:
    """Variance inflation factor per evaluated predictor column."""

    entries: dict[str, float]
    threshold: float = 5.0

    def over_threshold(self) -> list[str]:
        """Columns strictly exceeding the threshold (ties are kept)."""
        return [n for n, v in self.entries.items() if v > self.threshold]


def compute_vif(matrix: np.ndarray, names: list[str] | tuple[str, ...],
                threshold: float = 5.0) -> VifReport:
    """VIF_i = 1 / (1 - R²_i) from regressing column i on all the others
    (with intercept) by least squares; exact dependence reports +inf."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(names):
        raise SchemaError("matrix shape does not match the column names")
    n, m = X.shape
    if m < 2:
        raise SchemaError("variance inflation needs at least 2 columns")
    if n <= m:
        raise SchemaError(f"need more rows ({n}) than columns ({m})")

    entries: dict[str, float] = {}
    intercept = np.ones((n, 1))
    for i, name in enumerate(names):
        y = X[:, i]
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        if ss_tot == 0.0:
            # A constant column is perfectly explained by the intercept.
            entries[name] = math.inf
            continue
        others = np.hstack([intercept, np.delete(X, i, axis=1)])
        beta, _, _, _ = np.linalg.lstsq(others, y, rcond=None)
        resid = y - others @ beta
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
        if 1.0 - r2 < 1e-10:
            entries[name] = math.inf
        else:
            entries[name] = float(1.0 / (1.0 - r2))
    return VifReport(entries, threshold)


def prune_by_vif(table: UserFeatureTable, threshold: float = 5.0
                 ) -> tuple[UserFeatureTable, VifReport, list[str]]:
    """Single-pass pruning: compute VIF once over the predictor columns
    (targets and composites stay out of the assessment) and drop every
    column whose value strictly exceeds the threshold."""
    matrix, names = table.predictor_matrix()
    if np.isnan(matrix).any():
        raise SchemaError("predictors must be imputed before screening")
    report = compute_vif(matrix, names, threshold)
    removed = report.over_threshold()
    if len(removed) == len(names):
        raise ConfigError(
            f"threshold {threshold} removed every predictor column"
        )
    reduced = table.without_columns(set(removed)) if removed else table
    return reduced, report, removed


def drop_composites(table: UserFeatureTable,
                    rules: list[str] | None = None) -> UserFeatureTable:
    """Remove the flagged composite-sum columns, keeping their addends.

    ``rules`` defaults to the schema's excluded-composite flags; explicitly
    named columns must exist.
    """
    if rules is None:
        names = set(table.schema.composite_names())
    else:
        for name in rules:
            if name not in table.schema:
                raise SchemaError(f"composite rule names unknown column {name!r}")
        names = set(rules)
    if not names:
        return table
    return table.without_columns(names)
