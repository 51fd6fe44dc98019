"""Pipeline orchestration: impute, screen, tune, repeat, validate, report.

A benchmark run executes the full stage order — imputation per the
strategy map, composite removal, single-pass multicollinearity pruning,
then per grid cell a Bayesian search followed by the repeated evaluation,
genetic re-optimisation of the top cells with the agreement check, rank
-based significance testing, and best-cell selection. Every artefact
written into the output directory is a pure function of (config, seed);
wall-clock details go to the log stream only, so re-runs are byte
-identical.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import (RunConfig, resolve_strategy_map, schema_and_targets)
from .errors import ConfigError, OptimizationError
from .evaluation import (CellDistributions, derive_seed, repeated_eval, score,
                         select_best, significance_report, split_train_test)
from .features import compute_vif, drop_composites, make_transform
from .hpo import TunedCell, agreement_check, ga_optimize, tpe_optimize
from .impute import apply_strategy_map
from .models import (fit, fit_dummy, frozen_network_baseline, get_spec,
                     predict)
from .plan import PlanCell, build_plan
from .schema import FeatureSchema
from .synth import generate_synthetic_users
from .table import UserFeatureTable, load_table, save_table
from .textprep import (Vocabulary, default_comment_rules, load_comment_rules,
                       preprocess_post)

log = logging.getLogger("cqabench")

DUMMY_ROW = "Shallow Baseline"
FROZEN_ROW = "Frozen Network Baseline"

#: Environment variable supplying the default worker count.
WORKERS_ENV = "CQABENCH_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Data preparation


def _restrict(full: UserFeatureTable, schema: FeatureSchema) -> UserFeatureTable:
    keep = [full.schema.index(c.name) for c in schema.columns]
    return UserFeatureTable(schema, full.values[:, keep], full.missing[:, keep])


def load_run_table(config: RunConfig) -> UserFeatureTable:
    schema, _ = schema_and_targets(config)
    if config.source == "synthetic":
        full = generate_synthetic_users(config.synthetic_n, config.seed,
                                        config.profile)
        return _restrict(full, schema)
    return load_table(config.source, schema)


def impute_stage(config: RunConfig,
                 table: UserFeatureTable) -> UserFeatureTable:
    strategy_map = resolve_strategy_map(
        config.strategy_entries, table.schema,
        config.knn_params, config.em_params,
    )
    return apply_strategy_map(table, strategy_map)


@dataclass(frozen=True)
class ScreeningResult:
    table: UserFeatureTable
    composites_removed: tuple[str, ...]
    vif_entries: dict[str, float]
    vif_removed: tuple[str, ...]
    threshold: float


def screening_stage(config: RunConfig,
                    table: UserFeatureTable) -> ScreeningResult:
    composites = table.schema.composite_names()
    table = drop_composites(table)
    matrix, names = table.predictor_matrix()
    report = compute_vif(matrix, names, config.vif_threshold)
    removed = tuple(report.over_threshold())
    if len(removed) == len(names):
        raise ConfigError("multicollinearity threshold removed every predictor")
    reduced = table.without_columns(set(removed)) if removed else table
    return ScreeningResult(reduced, composites, dict(report.entries), removed,
                           config.vif_threshold)


# ---------------------------------------------------------------------------
# Per-cell evaluation


@dataclass(frozen=True)
class CellOutcome:
    cell: PlanCell
    status: str  # "ok" | "na"
    best_params: dict | None
    tune_objective: float | None
    distributions: CellDistributions | None
    error: str | None = None


def _positive_class(task: str) -> float:
    # The positive label for classification is the non-dropout encoding (0).
    return 0.0


def _metric_sign(task: str):
    return "r2" if task == "regression" else "f1"


def _cell_objective(X: np.ndarray, y: np.ndarray, cell: PlanCell, task: str,
                    ratio: float, master_seed: int):
    """Tuning objective: negative primary metric on an inner validation
    split of the tuning-training rows; deterministic per assignment."""
    stratify = y if task == "classification" else None
    outer_seed = derive_seed(master_seed, "tune-outer", *cell.key())
    train_idx, _ = split_train_test(X.shape[0], ratio, outer_seed, stratify)
    inner_strat = y[train_idx] if task == "classification" else None
    inner_seed = derive_seed(master_seed, "tune-inner", *cell.key())
    fit_rel, val_rel = split_train_test(train_idx.size, 0.75, inner_seed,
                                        inner_strat)
    fit_idx, val_idx = train_idx[fit_rel], train_idx[val_rel]
    spec = get_spec(cell.model_name)
    fit_seed = derive_seed(master_seed, "tune-fit", *cell.key())
    positive = _positive_class(task)
    primary = _metric_sign(task)

    def objective(params: dict) -> float:
        transform = make_transform(cell.fe_technique).fit(X[fit_idx])
        X_fit = transform.transform(X[fit_idx])
        X_val = transform.transform(X[val_idx])
        model = fit(spec, params, X_fit, y[fit_idx], task, seed=fit_seed)
        predictions = predict(model, X_val)
        if task == "classification":
            predictions = predictions[0]
        metrics = score(y[val_idx], predictions, task, positive_class=positive)
        return -getattr(metrics, primary)

    return objective


def _run_once_factory(X: np.ndarray, y: np.ndarray, cell: PlanCell, task: str,
                      ratio: float, params: dict):
    spec = get_spec(cell.model_name)
    stratify = y if task == "classification" else None
    positive = _positive_class(task)

    def run_once(seed: int):
        train_idx, test_idx = split_train_test(X.shape[0], ratio, seed,
                                               stratify)
        transform = make_transform(cell.fe_technique).fit(X[train_idx])
        X_train = transform.transform(X[train_idx])
        X_test = transform.transform(X[test_idx])
        model = fit(spec, params, X_train, y[train_idx], task, seed=seed)
        predictions = predict(model, X_test)
        if task == "classification":
            predictions = predictions[0]
        return score(y[test_idx], predictions, task, positive_class=positive)

    return run_once


def evaluate_cell(payload: dict) -> CellOutcome:
    """Tune one grid cell, then run the repeated evaluation with the tuned
    assignment. Module-level so worker processes can receive it."""
    cell: PlanCell = payload["cell"]
    X, y = payload["X"], payload["y"]
    task = payload["task"]
    config: RunConfig = payload["config"]
    spec = get_spec(cell.model_name)
    objective = _cell_objective(X, y, cell, task,
                                config.evaluation.split_ratio, config.seed)
    tune_seed = derive_seed(config.seed, "tpe", *cell.key())
    try:
        tuned = tpe_optimize(objective, spec.search_space,
                             config.hpo.tpe_trials, tune_seed,
                             n_startup=config.hpo.tpe_startup)
    except OptimizationError as exc:
        return CellOutcome(cell, "na", None, None, None, str(exc))

    run_once = _run_once_factory(X, y, cell, task,
                                 config.evaluation.split_ratio,
                                 tuned.best_params)
    dists = repeated_eval(run_once, config.evaluation.runs, config.seed,
                          label=cell.key())
    if dists.is_na:
        return CellOutcome(cell, "na", tuned.best_params,
                           tuned.best_objective, dists, dists.error)
    return CellOutcome(cell, "ok", tuned.best_params, tuned.best_objective,
                       dists)


def _baseline_outcomes(X: np.ndarray, y: np.ndarray, task: str,
                       config: RunConfig, target: str,
                       fe_list: tuple[str, ...]) -> dict:
    """Repeated evaluation of the no-learning floor and the frozen network
    under each feature-engineering technique."""
    positive = _positive_class(task)
    stratify = y if task == "classification" else None
    out: dict[str, dict[str, CellDistributions]] = {}
    for fe_kind in fe_list:
        per_row = {}
        for row_name in (DUMMY_ROW, FROZEN_ROW):
            def run_once(seed: int, _fe=fe_kind, _row=row_name):
                train_idx, test_idx = split_train_test(
                    X.shape[0], config.evaluation.split_ratio, seed, stratify)
                transform = make_transform(_fe).fit(X[train_idx])
                X_test = transform.transform(X[test_idx])
                if _row == DUMMY_ROW:
                    model = fit_dummy(task, y[train_idx], seed=seed)
                else:
                    model = frozen_network_baseline(4, task, X.shape[1],
                                                    seed=seed)
                predictions = predict(model, X_test)
                if task == "classification":
                    predictions = predictions[0]
                return score(y[test_idx], predictions, task,
                             positive_class=positive)

            per_row[row_name] = repeated_eval(
                run_once, config.evaluation.runs, config.seed,
                label=(target, fe_kind, row_name))
        out[fe_kind] = per_row
    return out


# ---------------------------------------------------------------------------
# The benchmark run


@dataclass(frozen=True)
class BenchmarkReport:
    report: dict

    @property
    def config_hash(self) -> str:
        return self.report["config_hash"]


def _finite(value: float) -> float | str:
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _dist_payload(dists: CellDistributions) -> dict:
    metrics = {}
    for name, dist in sorted(dists.metrics.items()):
        metrics[name] = {
            "mean": dist.mean, "std": dist.std, "median": dist.median,
            "text": dist.summary_text(),
        }
    return {"metrics": metrics, "n_runs": dists.n_runs,
            "n_failed": dists.n_failed}


def run_benchmark(config: RunConfig, workers: int | None = None
                  ) -> BenchmarkReport:
    workers = workers or default_workers()
    schema, targets = schema_and_targets(config)
    task = config.task
    log.info("loading data (%s)", config.source)
    table = load_run_table(config)
    log.info("imputing %d rows", table.n_rows)
    table = impute_stage(config, table)
    screening = screening_stage(config, table)
    table = screening.table

    model_names = config.model_names()
    plan = build_plan(model_names, list(config.fe), targets, config.seed)
    log.info("plan: %d cells (%d models x %d fe x %d targets)",
             len(plan), len(model_names), len(config.fe), len(targets))

    X, predictor_names = table.predictor_matrix()
    payloads = []
    for cell in plan.cells:
        payloads.append({
            "cell": cell, "X": X, "y": table.column(cell.target_name),
            "task": task, "config": config,
        })
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(evaluate_cell, payloads))
    else:
        outcomes = [evaluate_cell(p) for p in payloads]
    by_cell = {o.cell.key(): o for o in outcomes}

    baselines = {}
    if config.evaluation.include_baselines:
        for target in sorted({t.name for t in targets}):
            baselines[target] = _baseline_outcomes(
                X, table.column(target), task, config, target, config.fe)

    # Genetic re-optimisation of the best cells, per target.
    validation: dict[str, list] = {}
    primary = _metric_sign(task)
    for target in sorted({t.name for t in targets}):
        tuned_cells = [
            TunedCell(o.cell, -o.distributions.metrics[primary].mean,
                      o.best_params, get_spec(o.cell.model_name).search_space)
            for o in outcomes
            if o.cell.target_name == target and o.status == "ok"
        ]
        outcomes_for_target = []
        if tuned_cells:
            ranked = sorted(tuned_cells, key=lambda c: c.objective_value)
            k = min(config.hpo.top_k, len(ranked))
            for i, tuned in enumerate(ranked[:k]):
                objective = _cell_objective(
                    X, table.column(target), tuned.cell, task,
                    config.evaluation.split_ratio, config.seed)
                ga_seed = derive_seed(config.seed, "ga", *tuned.cell.key())
                try:
                    ga_result = ga_optimize(
                        objective, tuned.space,
                        population=config.hpo.ga_population,
                        generations=config.hpo.ga_generations, seed=ga_seed)
                except OptimizationError as exc:
                    outcomes_for_target.append(
                        {"cell": list(tuned.cell.key()), "status": "na",
                         "error": str(exc)})
                    continue
                report = agreement_check(tuned.best_params,
                                         ga_result.best_params)
                outcomes_for_target.append({
                    "cell": list(tuned.cell.key()),
                    "status": "ok",
                    "passed": report.passed,
                    "per_param": {
                        name: {
                            "bo": _finite(p.bo_value), "ga": _finite(p.ga_value),
                            "diff_percent": None if p.diff_percent is None
                            else p.diff_percent,
                            "agrees": p.agrees,
                        }
                        for name, p in sorted(report.per_param.items())
                    },
                })
        validation[target] = outcomes_for_target

    # Rank-based significance across the non-N/A cells of each target.
    significance: dict[str, dict] = {}
    alpha = config.evaluation.alpha
    for target in sorted({t.name for t in targets}):
        per_metric = {}
        ok_cells = [o for o in outcomes
                    if o.cell.target_name == target and o.status == "ok"]
        metric_names = ("r2", "rmse") if task == "regression" \
            else ("accuracy", "f1")
        for metric in metric_names:
            groups = [np.array(o.distributions.metrics[metric].values)
                      for o in ok_cells]
            labels = [o.cell.key() for o in ok_cells]
            if len(groups) < 2:
                per_metric[metric] = None
                continue
            rep = significance_report(groups, alpha=alpha, labels=labels)
            per_metric[metric] = {
                "h": rep.h, "p": rep.p, "n_groups": len(groups),
                "n_pairs": len(rep.posthoc),
                "significant_pairs": sum(
                    1 for pair in rep.posthoc.values() if pair.significant),
                "alpha": alpha,
            }
        significance[target] = per_metric

    best: dict[str, dict] = {}
    for target in sorted({t.name for t in targets}):
        results = {
            (o.cell.fe_technique, o.cell.model_name): o.distributions
            for o in outcomes if o.cell.target_name == target
            and o.status == "ok"
        }
        if not results:
            best[target] = None
            continue
        fe_kind, model_name = select_best(results, task)
        winner = by_cell[(fe_kind, model_name, target)]
        best[target] = {
            "fe": fe_kind, "model": model_name,
            "params": {k: _finite(v)
                       for k, v in sorted(winner.best_params.items())},
            "metrics": _dist_payload(winner.distributions)["metrics"],
        }

    cells_payload: dict = {}
    for o in outcomes:
        target_map = cells_payload.setdefault(o.cell.target_name, {})
        fe_map = target_map.setdefault(o.cell.fe_technique, {})
        entry = {"status": o.status}
        if o.status == "ok":
            entry.update(_dist_payload(o.distributions))
            entry["best_params"] = {
                k: _finite(v) for k, v in sorted(o.best_params.items())}
        else:
            entry["error"] = o.error
        fe_map[o.cell.model_name] = entry

    baseline_payload = {
        target: {
            fe_kind: {row: _dist_payload(d) for row, d in rows.items()}
            for fe_kind, rows in per_fe.items()
        }
        for target, per_fe in baselines.items()
    }

    report = {
        "package_version": __version__,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "rq": config.rq,
        "task": task,
        "data": {
            "source": config.source,
            "n_rows": int(table.n_rows),
            "predictors": list(predictor_names),
        },
        "screening": {
            "composites_removed": list(screening.composites_removed),
            "vif": {k: _finite(v)
                    for k, v in sorted(screening.vif_entries.items())},
            "vif_removed": list(screening.vif_removed),
            "vif_threshold": screening.threshold,
        },
        "plan": {
            "n_cells": len(plan),
            "fe": sorted(config.fe),
            "models": sorted(model_names),
            "targets": sorted({t.name for t in targets}),
        },
        "cells": cells_payload,
        "baselines": baseline_payload,
        "best": best,
        "validation": validation,
        "significance": significance,
    }
    return BenchmarkReport(report)


# ---------------------------------------------------------------------------
# Report writers


def _write_json(path: Path, payload: dict) -> None:
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_benchmark_report(report: BenchmarkReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "summary.json", report.report)

    rep = report.report
    with (out / "results.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target", "fe", "model", "status", "metric",
                         "mean", "std", "median", "n_runs", "n_failed"])
        for target in sorted(rep["cells"]):
            for fe_kind in sorted(rep["cells"][target]):
                for model in sorted(rep["cells"][target][fe_kind]):
                    entry = rep["cells"][target][fe_kind][model]
                    if entry["status"] != "ok":
                        writer.writerow([target, fe_kind, model, "na", "", "",
                                         "", "", "", ""])
                        continue
                    for metric in sorted(entry["metrics"]):
                        m = entry["metrics"][metric]
                        writer.writerow([
                            target, fe_kind, model, "ok", metric,
                            repr(m["mean"]), repr(m["std"]),
                            repr(m["median"]), entry["n_runs"],
                            entry["n_failed"],
                        ])

    with (out / "hyperparams.csv").open("w", encoding="utf-8",
                                        newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target", "fe", "model", "hyperparameter", "value"])
        for target in sorted(rep["best"]):
            entry = rep["best"][target]
            if not entry:
                continue
            for name in sorted(entry["params"]):
                writer.writerow([target, entry["fe"], entry["model"], name,
                                 entry["params"][name]])

    with (out / "validation.csv").open("w", encoding="utf-8",
                                       newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target", "fe", "model", "hyperparameter",
                         "bo_value", "ga_value", "diff_percent", "agrees"])
        for target in sorted(rep["validation"]):
            for outcome in rep["validation"][target]:
                if outcome.get("status") != "ok":
                    continue
                fe_kind, model, _ = outcome["cell"]
                for name in sorted(outcome["per_param"]):
                    p = outcome["per_param"][name]
                    diff = "" if p["diff_percent"] is None \
                        else repr(p["diff_percent"])
                    writer.writerow([target, fe_kind, model, name,
                                     p["bo"], p["ga"], diff, p["agrees"]])

    (out / "tables.txt").write_text(render_tables(rep), encoding="utf-8")


def render_tables(rep: dict) -> str:
    """Human-readable model-by-technique matrices with
    "mean ± std (median)" cells, one block per target and metric."""
    lines = []
    task = rep["task"]
    metric_names = ("r2", "rmse") if task == "regression" \
        else ("accuracy", "f1")
    for target in sorted(rep["cells"]):
        fe_kinds = sorted(rep["cells"][target])
        models = sorted({
            m for fe_kind in fe_kinds for m in rep["cells"][target][fe_kind]
        })
        rows = []
        if rep.get("baselines", {}).get(target):
            rows.append(DUMMY_ROW)
        rows.extend(models)
        if rep.get("baselines", {}).get(target):
            rows.append(FROZEN_ROW)
        for metric in metric_names:
            lines.append(f"== {target} :: {metric} ==")
            width = max(len(r) for r in rows) + 2
            header = " " * width + " | ".join(f"{f:^28}" for f in fe_kinds)
            lines.append(header)
            for row_name in rows:
                cells = []
                for fe_kind in fe_kinds:
                    if row_name in (DUMMY_ROW, FROZEN_ROW):
                        entry = rep["baselines"][target][fe_kind][row_name]
                        text = entry["metrics"][metric]["text"]
                    else:
                        entry = rep["cells"][target][fe_kind][row_name]
                        text = entry["metrics"][metric]["text"] \
                            if entry["status"] == "ok" else "N/A"
                    cells.append(f"{text:^28}")
                lines.append(f"{row_name:<{width}}" + " | ".join(cells))
            lines.append("")
    return "\n".join(lines) + "\n"


def completed_marker(out_dir: str | Path, filename: str) -> dict | None:
    path = Path(out_dir) / filename
    if not path.exists():
        return None
    try:
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None


def is_completed(out_dir: str | Path, filename: str, config_hash: str) -> bool:
    payload = completed_marker(out_dir, filename)
    return bool(payload) and payload.get("config_hash") == config_hash


# ---------------------------------------------------------------------------
# Stage runs (impute / features)


def run_impute(config: RunConfig, out_dir: str | Path) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = load_run_table(config)
    before = int(table.missing.sum())
    imputed = impute_stage(config, table)
    save_table(imputed, out / "imputed.csv")
    summary = {
        "config_hash": config.config_hash(),
        "n_rows": int(imputed.n_rows),
        "missing_before": before,
        "missing_after": int(imputed.missing.sum()),
    }
    _write_json(out / "impute_summary.json", summary)
    return summary


def run_features(config: RunConfig, out_dir: str | Path) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = impute_stage(config, load_run_table(config))
    screening = screening_stage(config, table)
    save_table(screening.table, out / "reduced.csv")
    summary = {
        "config_hash": config.config_hash(),
        "composites_removed": list(screening.composites_removed),
        "vif": {k: _finite(v) for k, v in sorted(screening.vif_entries.items())},
        "vif_removed": list(screening.vif_removed),
        "vif_threshold": screening.threshold,
        "n_predictors_kept": len(screening.table.schema.predictor_names()),
    }
    _write_json(out / "screening.json", summary)
    return summary


# ---------------------------------------------------------------------------
# Text preprocessing run


def _read_posts(input_path: str | Path) -> list[tuple[str, str]]:
    path = Path(input_path)
    if path.is_dir():
        return [
            (p.stem, p.read_text(encoding="utf-8"))
            for p in sorted(path.glob("*.html"))
        ]
    posts = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        header = [h.strip().lower() for h in header]
        if "id" not in header or "html" not in header:
            raise ConfigError(
                f"{path}: expected an (id, html) table with a header row"
            )
        id_col, html_col = header.index("id"), header.index("html")
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) <= max(id_col, html_col):
                log.warning("%s: row %d is too short; skipped", path, i + 1)
                continue
            posts.append((row[id_col], row[html_col]))
    return posts


def run_textprep(config: RunConfig, out_dir: str | Path) -> dict:
    section = (config.raw.get("textprep") or {})
    input_path = section.get("input")
    if not input_path:
        raise ConfigError("config lacks a textprep.input entry")
    rules = load_comment_rules(section["rules"]) if section.get("rules") \
        else default_comment_rules()
    stopwords = frozenset(section["stopwords"]) \
        if section.get("stopwords") else None

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    posts = _read_posts(input_path)
    vocab = Vocabulary()
    records, failures = [], 0
    language_counts: dict[str, int] = {}
    for post_id, html in posts:
        try:
            processed = preprocess_post(html, post_id, rules, stopwords)
        except Exception as exc:  # keep going; the failure is counted
            failures += 1
            log.warning("post %s failed: %s", post_id, exc)
            continue
        for snippet in processed.snippets:
            language_counts[snippet.language] = \
                language_counts.get(snippet.language, 0) + 1
        record = {
            "post_id": processed.post_id,
            "clean_text": processed.clean_text,
            "snippets": [
                {"language": s.language, "code": s.text}
                for s in processed.snippets
            ],
        }
        if processed.sequence is not None:
            vocab.add_sequence(processed.sequence)
            record.update({
                "tokens": list(processed.sequence.tokens),
                "token_ids": vocab.encode(processed.sequence),
                "word_span": list(processed.sequence.word_span),
                "code_span": list(processed.sequence.code_span),
                "specials": processed.sequence.specials,
            })
        records.append(record)

    with (out / "records.jsonl").open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
    vocab.save(out / "vocab.json")
    with (out / "language_counts.csv").open("w", encoding="utf-8",
                                            newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["language", "snippets"])
        for language in sorted(language_counts):
            writer.writerow([language, language_counts[language]])

    summary = {
        "config_hash": config.config_hash(),
        "n_posts": len(posts),
        "n_processed": len(records),
        "n_failed": failures,
        "language_counts": dict(sorted(language_counts.items())),
        "vocabulary_size": len(vocab),
    }
    _write_json(out / "textprep_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# Hybrid numeric-versus-textual evaluation


def _read_score_file(path: str | Path) -> dict[str, float]:
    scores = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].strip().lower() in ("user_id", "id"):
                continue
            try:
                scores[row[0].strip()] = float(row[1])
            except (IndexError, ValueError):
                raise ConfigError(
                    f"{path}: row {i + 1} is not a (user id, probability) "
                    f"pair"
                ) from None
    return scores


def _read_truth_file(path: str | Path) -> dict[str, str]:
    labels = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].strip().lower() in ("user_id", "id"):
                continue
            if len(row) < 2:
                raise ConfigError(
                    f"{path}: row {i + 1} is not a (user id, label) pair"
                )
            labels[row[0].strip()] = row[1].strip()
    return labels


def run_hybrid_eval(config: RunConfig, out_dir: str | Path) -> dict:
    from .hybrid import NEGATIVE_CLASS, POSITIVE_CLASS, compare_predictors

    section = (config.raw.get("hybrid") or {})
    for key in ("numeric_scores", "textual_scores", "ground_truth"):
        if not section.get(key):
            raise ConfigError(f"config lacks a hybrid.{key} entry")
    threshold = float(section.get("threshold", 0.5))

    truth = _read_truth_file(section["ground_truth"])
    numeric = _read_score_file(section["numeric_scores"])
    textual = _read_score_file(section["textual_scores"])
    for name, scores in (("numeric", numeric), ("textual", textual)):
        unknown = sorted(set(scores) - set(truth))
        if unknown:
            raise ConfigError(
                f"{name} score file names unknown users: {unknown[:10]}"
            )
        missing = sorted(set(truth) - set(scores))
        if missing:
            raise ConfigError(
                f"{name} score file lacks users: {missing[:10]}"
            )
        bad = [u for u, s in scores.items() if not 0.0 <= s <= 1.0]
        if bad:
            raise ConfigError(
                f"{name} score file has probabilities outside [0, 1] "
                f"for users: {sorted(bad)[:10]}"
            )
    for uid, label in truth.items():
        if label not in (POSITIVE_CLASS, NEGATIVE_CLASS):
            raise ConfigError(f"user {uid}: label {label!r} is not "
                              f"dropout/non-dropout")

    ids = sorted(truth)
    labels = np.array([1.0 if truth[u] == POSITIVE_CLASS else 0.0
                       for u in ids])
    numeric_preds = np.array(
        [1.0 if numeric[u] >= threshold else 0.0 for u in ids])
    textual_preds = np.array(
        [1.0 if textual[u] >= threshold else 0.0 for u in ids])
    comparison = compare_predictors(numeric_preds, textual_preds, labels, ids)

    def matrix_payload(pair):
        cm, metrics = pair
        return {
            "tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn,
            "accuracy": metrics.accuracy, "precision": metrics.precision,
            "recall": metrics.recall, "f1": metrics.f1,
        }

    report = {
        "config_hash": config.config_hash(),
        "threshold": threshold,
        "positive_class": POSITIVE_CLASS,
        "n_users": len(ids),
        "class_counts": {
            POSITIVE_CLASS: int(labels.sum()),
            NEGATIVE_CLASS: int(labels.size - labels.sum()),
        },
        "numeric": matrix_payload(comparison.numeric),
        "textual": matrix_payload(comparison.textual),
        "agreement_rate": comparison.agreement_rate,
        "tp_delta": comparison.tp_delta,
        "tn_delta": comparison.tn_delta,
        "n_disagreements": len(comparison.disagreements),
    }

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "hybrid_report.json", report)
    with (out / "disagreements.csv").open("w", encoding="utf-8",
                                          newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "numeric_prediction",
                         "textual_prediction", "label", "correct_side"])
        for record in comparison.disagreements:
            writer.writerow([record.user_id, record.numeric_prediction,
                             record.textual_prediction, record.label,
                             record.correct_side])
    (out / "matrices.txt").write_text(_render_matrices(report),
                                      encoding="utf-8")
    return report


def _render_matrices(report: dict) -> str:
    def block(title: str, m: dict) -> list[str]:
        return [
            title,
            f"{'':>22}{'Predicted Dropout':>20}{'Predicted Non-Dropout':>24}",
            f"{'Actual Dropout':>22}{m['tn']:>20}{m['fp']:>24}",
            f"{'Actual Non-Dropout':>22}{m['fn']:>20}{m['tp']:>24}",
            f"accuracy {m['accuracy']:.3f}  f1 {m['f1']:.3f}",
            "",
        ]

    lines = block("Numeric-based", report["numeric"])
    lines += block("Textual-based", report["textual"])
    lines.append(f"agreement rate {report['agreement_rate']:.3f}  "
                 f"disagreements {report['n_disagreements']}")
    return "\n".join(lines) + "\n"
