"""Missing-value handling: zero fill, weighted nearest neighbours, and a
multivariate-Gaussian expectation-maximization fit, plus the column-to-
strategy map that applies them in stage order (zero, then KNN, then EM).

Observed cells are never altered; each operation returns a new table with
the mask cleared for the columns it completed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ImputationError, SchemaError
from .schema import Role
from .table import UserFeatureTable


@dataclass(frozen=True)
class KnnParams:
    k: int = 5
    metric: str = "euclidean"
    weighting: str = "inverse-distance"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ImputationError(f"neighbour count must be >= 1, got {self.k}")
        if self.metric != "euclidean":
            raise ImputationError(f"unsupported metric {self.metric!r}")
        if self.weighting not in ("uniform", "inverse-distance"):
            raise ImputationError(f"unsupported weighting {self.weighting!r}")


@dataclass(frozen=True)
class EmParams:
    tolerance: float = 1e-6
    max_iterations: int = 100
    init: str = "random"

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ImputationError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ImputationError("iteration cap must be >= 1")
        if self.init != "random":
            raise ImputationError(f"unsupported initialisation {self.init!r}")


@dataclass(frozen=True)
class ImputationStrategy:
    kind: str  # "zero" | "knn" | "em"
    knn: KnnParams = field(default_factory=KnnParams)
    em: EmParams = field(default_factory=EmParams)

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "knn", "em"):
            raise ImputationError(f"unknown imputation strategy {self.kind!r}")


@dataclass(frozen=True)
class StrategyMap:
    """Column name to strategy assignment (each column at most once)."""

    assignments: dict[str, ImputationStrategy]

    def validate(self, table: UserFeatureTable) -> None:
        for name in self.assignments:
            if name not in table.schema:
                raise SchemaError(f"strategy map names unknown column {name!r}")

    def columns_with(self, kind: str) -> list[str]:
        return [c for c, s in self.assignments.items() if s.kind == kind]


@dataclass(frozen=True)
class EmInfo:
    converged: bool
    n_iterations: int
    loglik: tuple[float, ...]


def impute_zero(table: UserFeatureTable, column: str) -> UserFeatureTable:
    """Fill every masked cell of ``column`` with 0.0 and clear its mask."""
    j = table.schema.index(column)
    values = table.column(column).copy()
    values[table.missing[:, j]] = 0.0
    return table.replace_column(column, values)


def _neighbour_features(table: UserFeatureTable, column: str) -> np.ndarray:
    """Standardized, fully observed predictor columns excluding targets,
    composites, and the column being imputed."""
    names = [
        c.name for c in table.schema.columns
        if c.role is Role.PREDICTOR
        and c.name != column
        and not table.column_missing(c.name).any()
    ]
    if not names:
        raise ImputationError(
            f"no complete predictor columns available as neighbour features "
            f"for {column!r}"
        )
    feats = table.matrix(names)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0] = 1.0
    return (feats - mean) / std


def impute_knn(table: UserFeatureTable, column: str,
               params: KnnParams | None = None,
               feature_columns: list[str] | None = None) -> UserFeatureTable:
    """Fill masked cells from the k nearest donor rows.

    Distances are Euclidean over the standardized complete predictor
    columns. Each hole becomes the inverse-distance weighted mean of the k
    nearest donors' values; ties on distance break on the lower row index.
    Donors at distance exactly zero short-circuit to their plain mean.
    """
    params = params or KnnParams()
    j = table.schema.index(column)
    miss = table.missing[:, j]
    donors = np.flatnonzero(~miss)
    queries = np.flatnonzero(miss)
    if donors.size == 0:
        raise ImputationError(f"column {column!r} has no observed values; "
                              f"nearest-neighbour strategy misassigned")
    if donors.size < params.k:
        raise ImputationError(
            f"column {column!r} has {donors.size} observed donors, "
            f"fewer than k={params.k}"
        )
    if queries.size == 0:
        return table

    if feature_columns is None:
        feats = _neighbour_features(table, column)
    else:
        feats = table.matrix(feature_columns)
        mean, std = feats.mean(axis=0), feats.std(axis=0)
        std[std == 0] = 1.0
        feats = (feats - mean) / std

    donor_feats = feats[donors]
    donor_values = table.values[donors, j]
    filled = table.column(column).copy()
    for q in queries:
        diff = donor_feats - feats[q]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        order = np.lexsort((donors, dist))[: params.k]
        d = dist[order]
        v = donor_values[order]
        if np.any(d == 0.0):
            filled[q] = np.mean(v[d == 0.0])
        elif params.weighting == "uniform":
            filled[q] = np.mean(v)
        else:
            w = 1.0 / d
            filled[q] = np.dot(w, v) / np.sum(w)
    return table.replace_column(column, filled)


def _pattern_groups(mask: np.ndarray) -> dict[tuple[bool, ...], np.ndarray]:
    groups: dict[tuple[bool, ...], list[int]] = {}
    for i, row in enumerate(mask):
        groups.setdefault(tuple(row), []).append(i)
    return {k: np.asarray(v) for k, v in groups.items()}


def _ensure_spd(cov: np.ndarray) -> np.ndarray:
    """Ridge a (near-)singular covariance so conditioning stays defined."""
    try:
        np.linalg.cholesky(cov)
        return cov
    except np.linalg.LinAlgError:
        ridge = 1e-8 * float(np.mean(np.diag(cov)))
        ridge = ridge if ridge > 0 else 1e-12
        warnings.warn("singular covariance during EM; applying diagonal ridge")
        return cov + ridge * np.eye(cov.shape[0])


def _observed_loglik(values: np.ndarray, mask: np.ndarray, mu: np.ndarray,
                     cov: np.ndarray,
                     patterns: dict[tuple[bool, ...], np.ndarray]) -> float:
    total = 0.0
    for pattern, rows in patterns.items():
        obs = ~np.asarray(pattern)
        if not obs.any():
            continue
        sub = values[np.ix_(rows, np.flatnonzero(obs))]
        mu_o = mu[obs]
        cov_oo = _ensure_spd(cov[np.ix_(obs, obs)])
        sign, logdet = np.linalg.slogdet(cov_oo)
        solve = np.linalg.solve(cov_oo, (sub - mu_o).T)
        quad = np.sum((sub - mu_o).T * solve, axis=0)
        d = int(obs.sum())
        total += float(
            -0.5 * np.sum(quad)
            - 0.5 * rows.size * (logdet + d * np.log(2.0 * np.pi))
        )
    return total


def impute_em(table: UserFeatureTable, columns: list[str],
              params: EmParams | None = None, seed: int = 42,
              return_info: bool = False):
    """Joint Gaussian EM over a column group.

    Missing cells are initialised with random draws around each column's
    observed moments, then iteratively set to their conditional expectation
    given the row's observed values; the M-step re-estimates the mean and
    covariance from the completed data plus the conditional-covariance
    correction, so the observed-data log-likelihood never decreases.
    Convergence is declared when successive log-likelihoods change by less
    than the tolerance; hitting the iteration cap sets the returned
    non-convergence flag.
    """
    params = params or EmParams()
    if not columns:
        raise ImputationError("empty column set for joint Gaussian imputation")
    idx = [table.schema.index(c) for c in columns]
    values = table.values[:, idx].copy()
    mask = table.missing[:, idx].copy()
    n, g = values.shape
    if n < 2:
        raise ImputationError("need at least 2 rows to fit a joint Gaussian")
    for c, j in zip(columns, range(g)):
        if (~mask[:, j]).sum() < 2:
            raise ImputationError(f"column {c!r} has fewer than 2 observed values")

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE3)))
    for j in range(g):
        obs = values[~mask[:, j], j]
        holes = mask[:, j]
        if holes.any():
            scale = obs.std()
            values[holes, j] = rng.normal(obs.mean(), scale if scale > 0 else 1.0,
                                          holes.sum())

    patterns = _pattern_groups(mask)
    mu = values.mean(axis=0)
    cov = _ensure_spd(np.cov(values, rowvar=False, bias=True).reshape(g, g))
    loglik = [_observed_loglik(values, mask, mu, cov, patterns)]
    converged = False
    iterations = 0

    for _ in range(params.max_iterations):
        iterations += 1
        correction = np.zeros((g, g))
        for pattern, rows in patterns.items():
            m = np.asarray(pattern)
            if not m.any():
                continue
            o = ~m
            if o.any():
                cov_oo = _ensure_spd(cov[np.ix_(o, o)])
                gain = np.linalg.solve(cov_oo, cov[np.ix_(o, m)])
                resid = values[np.ix_(rows, np.flatnonzero(o))] - mu[o]
                values[np.ix_(rows, np.flatnonzero(m))] = mu[m] + resid @ gain
                cond_cov = cov[np.ix_(m, m)] - cov[np.ix_(m, o)] @ gain
            else:
                values[np.ix_(rows, np.flatnonzero(m))] = mu[m]
                cond_cov = cov
            correction[np.ix_(m, m)] += rows.size * cond_cov

        mu = values.mean(axis=0)
        centered = values - mu
        cov = _ensure_spd((centered.T @ centered + correction) / n)
        loglik.append(_observed_loglik(values, mask, mu, cov, patterns))
        if abs(loglik[-1] - loglik[-2]) < params.tolerance:
            converged = True
            break

    # Final pass: cells carry conditional expectations under the converged fit.
    for pattern, rows in patterns.items():
        m = np.asarray(pattern)
        if not m.any():
            continue
        o = ~m
        if o.any():
            cov_oo = _ensure_spd(cov[np.ix_(o, o)])
            gain = np.linalg.solve(cov_oo, cov[np.ix_(o, m)])
            resid = values[np.ix_(rows, np.flatnonzero(o))] - mu[o]
            values[np.ix_(rows, np.flatnonzero(m))] = mu[m] + resid @ gain
        else:
            values[np.ix_(rows, np.flatnonzero(m))] = mu[m]

    new_values = table.values.copy()
    new_missing = table.missing.copy()
    for col_pos, j in enumerate(idx):
        new_values[:, j] = values[:, col_pos]
        new_missing[:, j] = False
    result = UserFeatureTable(table.schema, new_values, new_missing)
    if return_info:
        return result, EmInfo(converged, iterations, tuple(loglik))
    return result


def apply_strategy_map(table: UserFeatureTable,
                       strategy_map: StrategyMap) -> UserFeatureTable:
    """Run all assigned strategies in stage order: zero first (structural
    absences become legitimate donor values), then nearest neighbours over
    the completed columns, then joint Gaussian groups."""
    strategy_map.validate(table)
    out = table
    for name in strategy_map.columns_with("zero"):
        out = impute_zero(out, name)
    for name in strategy_map.columns_with("knn"):
        try:
            out = impute_knn(out, name, strategy_map.assignments[name].knn)
        except ImputationError as exc:
            raise ImputationError(f"column {name!r}: {exc}") from exc

    em_groups: dict[EmParams, list[str]] = {}
    for name in strategy_map.columns_with("em"):
        em_groups.setdefault(strategy_map.assignments[name].em, []).append(name)
    for em_params, names in em_groups.items():
        out = impute_em(out, names, em_params)
    return out
