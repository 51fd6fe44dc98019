"""Metrics, data splitting, repeated evaluation, and significance testing.

Regression is scored with R² and RMSE, classification with accuracy,
precision, recall, and F1 for a declared positive class. Performance
distributions over repeated runs are compared with a tie-corrected
Kruskal-Wallis test followed by pairwise rank-based post-hoc comparisons
under a Bonferroni adjustment, and summaries use the benchmark's
"mean ± std (median)" format with the population standard deviation.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import ConfigError, UndefinedStatisticError


# ---------------------------------------------------------------------------
# Splitting


def split_train_test(n_rows: int, ratio: float = 0.8, seed: int = 42,
                     stratify: np.ndarray | None = None
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, exhaustive shuffled index split; stratified per class when
    ``stratify`` labels are given."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be inside (0, 1), got {ratio}")
    if n_rows < 2:
        raise ConfigError("need at least 2 rows to split")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x59)))
    if stratify is None:
        perm = rng.permutation(n_rows)
        n_train = int(round(ratio * n_rows))
        n_train = min(max(n_train, 1), n_rows - 1)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])

    stratify = np.asarray(stratify)
    if stratify.shape[0] != n_rows:
        raise ConfigError("stratification labels must align with the rows")
    train_parts, test_parts = [], []
    for label in np.unique(stratify):
        members = np.flatnonzero(stratify == label)
        members = members[rng.permutation(members.size)]
        n_train = int(round(ratio * members.size))
        if members.size >= 2:
            n_train = min(max(n_train, 1), members.size - 1)
        train_parts.append(members[:n_train])
        test_parts.append(members[n_train:])
    return np.sort(np.concatenate(train_parts)), \
        np.sort(np.concatenate(test_parts))


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class MetricSet:
    r2: float | None = None
    rmse: float | None = None
    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None

    def primary(self, task: str) -> float:
        return self.r2 if task == "regression" else self.f1

    def as_dict(self) -> dict[str, float]:
        return {k: v for k, v in vars(self).items() if v is not None}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive_class: object = 1.0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ConfigError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray,
                         positive_class=1.0) -> "ConfusionMatrix":
        y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
        if y_true.shape != y_pred.shape:
            raise ConfigError("prediction/label length mismatch")
        pos_true = y_true == positive_class
        pos_pred = y_pred == positive_class
        return cls(
            tp=int(np.sum(pos_true & pos_pred)),
            fp=int(np.sum(~pos_true & pos_pred)),
            fn=int(np.sum(pos_true & ~pos_pred)),
            tn=int(np.sum(~pos_true & ~pos_pred)),
            positive_class=positive_class,
        )

    def metrics(self) -> MetricSet:
        total = self.total
        accuracy = (self.tp + self.tn) / total if total else 0.0
        precision = self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0
        recall = self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0
        f1 = (2.0 * self.tp / (2.0 * self.tp + self.fp + self.fn)
              if 2 * self.tp + self.fp + self.fn else 0.0)
        return MetricSet(accuracy=accuracy, precision=precision,
                         recall=recall, f1=f1)


def score(y_true: np.ndarray, y_pred: np.ndarray, task: str,
          positive_class=1.0) -> MetricSet:
    """R² = 1 - SS_res/SS_tot and RMSE for regression; confusion-derived
    accuracy/precision/recall/F1 for classification."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ConfigError("prediction/label length mismatch")
    if task == "regression":
        ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
        if ss_tot == 0.0:
            raise UndefinedStatisticError(
                "R² undefined for a constant target"
            )
        ss_res = float(np.sum((y_true - y_pred) ** 2))
        return MetricSet(
            r2=1.0 - ss_res / ss_tot,
            rmse=float(np.sqrt(np.mean((y_true - y_pred) ** 2))),
        )
    if task == "classification":
        cm = ConfusionMatrix.from_predictions(y_true, y_pred, positive_class)
        return cm.metrics()
    raise ConfigError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# Run distributions and summaries


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float  # population standard deviation
    median: float
    text: str


def summarize(values) -> Summary:
    """The benchmark reporting format: "mean ± std (median)"."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ConfigError("cannot summarise an empty value list")
    mean = float(arr.mean())
    # Population std; identical values report exactly zero spread.
    std = 0.0 if np.all(arr == arr[0]) else float(arr.std())
    median = float(np.median(arr))
    if np.all(arr == arr[0]):
        mean = float(arr[0])
    text = f"{round(mean, 3)} ± {round(std, 3)} ({round(median, 3)})"
    return Summary(mean, std, median, text)


@dataclass(frozen=True)
class RunDistribution:
    values: tuple[float, ...]
    mean: float
    std: float
    median: float

    @classmethod
    def from_values(cls, values) -> "RunDistribution":
        s = summarize(values)
        return cls(tuple(float(v) for v in values), s.mean, s.std, s.median)

    def summary_text(self) -> str:
        return summarize(self.values).text


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 32-bit per-run seed from the master seed and any labels
    (process-independent, unlike the built-in string hash)."""
    digest = hashlib.sha256(str(master_seed).encode("utf-8"))
    for part in parts:
        digest.update(b"\x1f")
        digest.update(str(part).encode("utf-8"))
    return int.from_bytes(digest.digest()[:4], "little")


@dataclass(frozen=True)
class CellDistributions:
    """Per-metric distributions for one grid cell, plus failure bookkeeping."""

    metrics: dict[str, RunDistribution] | None
    n_runs: int
    n_failed: int
    error: str | None = None

    @property
    def is_na(self) -> bool:
        return self.metrics is None


def repeated_eval(run_once, runs: int = 100, master_seed: int = 42,
                  label: object = "") -> CellDistributions:
    """Execute ``run_once(seed) -> MetricSet`` with derived per-run seeds.

    Individual failures are recorded; a cell whose every run failed is
    reported N/A with the last error message attached.
    """
    if runs < 1:
        raise ConfigError("need at least one run")
    collected: dict[str, list[float]] = {}
    n_failed, last_error = 0, None
    for i in range(runs):
        seed = derive_seed(master_seed, label, i)
        try:
            metrics = run_once(seed)
        except Exception as exc:  # per-run failure, not fatal for the cell
            n_failed += 1
            last_error = f"{type(exc).__name__}: {exc}"
            continue
        for name, value in metrics.as_dict().items():
            collected.setdefault(name, []).append(float(value))
    if not collected:
        return CellDistributions(None, runs, n_failed, last_error)
    return CellDistributions(
        {name: RunDistribution.from_values(vals)
         for name, vals in collected.items()},
        runs, n_failed, None,
    )


# ---------------------------------------------------------------------------
# Nonparametric tests


def _rank_all(pooled: np.ndarray) -> np.ndarray:
    """Midranks (average ranks for ties), 1-based."""
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(pooled.size, dtype=np.float64)
    sorted_vals = pooled[order]
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def kruskal_wallis(groups: list[np.ndarray]) -> tuple[float, float]:
    """Tie-corrected H statistic with a chi-squared (k-1 df) p-value.

    Identical values across all groups give (0, 1) by convention.
    """
    if len(groups) < 2:
        raise ConfigError("need at least 2 groups")
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if any(a.size == 0 for a in arrays):
        raise ConfigError("every group must be non-empty")
    pooled = np.concatenate(arrays)
    n_total = pooled.size
    if np.all(pooled == pooled[0]):
        return 0.0, 1.0

    ranks = _rank_all(pooled)
    h = 0.0
    offset = 0
    for a in arrays:
        r = ranks[offset:offset + a.size]
        h += r.sum() ** 2 / a.size
        offset += a.size
    h = 12.0 / (n_total * (n_total + 1.0)) * h - 3.0 * (n_total + 1.0)

    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    correction = 1.0 - tie_term / (n_total**3 - n_total)
    h = h / correction
    p = float(stats.chi2.sf(h, len(arrays) - 1))
    return float(h), p


@dataclass(frozen=True)
class PosthocPair:
    statistic: float
    raw_p: float
    adjusted_p: float
    significant: bool


@dataclass(frozen=True)
class SignificanceReport:
    h: float
    p: float
    posthoc: dict[tuple, PosthocPair]
    alpha: float = 0.01
    correction: str = "bonferroni"


def conover_iman(groups: list[np.ndarray], alpha: float = 0.01,
                 labels: list | None = None) -> dict[tuple, PosthocPair]:
    """Pairwise rank-based t-type comparisons after Kruskal-Wallis, with
    Bonferroni-adjusted two-sided p-values."""
    h, _ = kruskal_wallis(groups)
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    labels = labels if labels is not None else list(range(len(arrays)))
    if len(labels) != len(arrays):
        raise ConfigError("labels must align with the groups")
    pooled = np.concatenate(arrays)
    n_total = pooled.size
    k = len(arrays)
    ranks = _rank_all(pooled)
    mean_ranks, sizes = [], []
    offset = 0
    for a in arrays:
        mean_ranks.append(float(ranks[offset:offset + a.size].mean()))
        sizes.append(a.size)
        offset += a.size

    # Rank variance with ties; reduces to N(N+1)/12 without them.
    s2 = (float(np.sum(ranks**2)) - n_total * (n_total + 1.0) ** 2 / 4.0) \
        / (n_total - 1.0)
    factor = s2 * (n_total - 1.0 - h) / (n_total - k)
    n_pairs = k * (k - 1) // 2

    out: dict[tuple, PosthocPair] = {}
    for i in range(k):
        for j in range(i + 1, k):
            if factor <= 0:
                # Degenerate spread (e.g. identical groups): no evidence.
                out[(labels[i], labels[j])] = PosthocPair(0.0, 1.0, 1.0, False)
                continue
            se = math.sqrt(factor * (1.0 / sizes[i] + 1.0 / sizes[j]))
            t = (mean_ranks[i] - mean_ranks[j]) / se
            raw = 2.0 * float(stats.t.sf(abs(t), n_total - k))
            adj = min(1.0, raw * n_pairs)
            out[(labels[i], labels[j])] = PosthocPair(float(t), raw, adj,
                                                      adj < alpha)
    return out


def significance_report(groups: list[np.ndarray], alpha: float = 0.01,
                        labels: list | None = None) -> SignificanceReport:
    h, p = kruskal_wallis(groups)
    posthoc = conover_iman(groups, alpha=alpha, labels=labels)
    return SignificanceReport(h, p, posthoc, alpha)


def ks_normality(sample: np.ndarray) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov distance against a normal with the
    sample's own mean and (population) standard deviation; asymptotic
    two-sided p-value."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n < 5:
        raise UndefinedStatisticError("need at least 5 observations")
    sd = x.std()
    if sd == 0:
        raise UndefinedStatisticError("normality undefined for constant data")
    cdf = stats.norm.cdf(x, loc=x.mean(), scale=sd)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    d = float(max(upper.max(), lower.max()))
    p = float(special.kolmogorov(math.sqrt(n) * d))
    return d, p


# ---------------------------------------------------------------------------
# Best-cell selection


def select_best(results: dict[tuple[str, str], CellDistributions],
                task: str) -> tuple[str, str]:
    """Pick the winning (fe, model) cell.

    Regression maximises mean R² (ties: lower mean RMSE, then lexicographic
    cell key); classification maximises mean F1 (ties: higher accuracy,
    then lexicographic). Cells reported N/A are skipped.
    """
    candidates = []
    for key, dist in results.items():
        if dist is None or dist.is_na:
            continue
        if task == "regression":
            rank = (-dist.metrics["r2"].mean, dist.metrics["rmse"].mean, key)
        else:
            rank = (-dist.metrics["f1"].mean, -dist.metrics["accuracy"].mean,
                    key)
        candidates.append((rank, key))
    if not candidates:
        raise ConfigError("every cell is N/A; nothing to select")
    return min(candidates)[1]
