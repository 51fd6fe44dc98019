"""cqabench: configuration-driven benchmarking of user-activity, code
quality, and dropout prediction pipelines for community-Q&A data."""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config
from .evaluation import (ConfusionMatrix, MetricSet, RunDistribution,
                         kruskal_wallis, score, split_train_test, summarize)
from .features import compute_vif, drop_composites, fit_apply_transform, \
    pearson_r, prune_by_vif
from .hpo import SearchSpace, agreement_check, ga_optimize, refine_top_k, \
    tpe_optimize
from .impute import apply_strategy_map, impute_em, impute_knn, impute_zero
from .pipeline import run_benchmark, run_hybrid_eval, run_textprep, \
    write_benchmark_report
from .plan import ExperimentPlan, build_plan
from .schema import FeatureSchema, TargetSpec, schema_for_rq, targets_for_rq
from .synth import SyntheticProfile, generate_synthetic_users
from .table import UserFeatureTable, load_table, save_table
from .textprep import cochran_n, pack_sequence, preprocess_post

__all__ = [
    "ConfusionMatrix", "ExperimentPlan", "FeatureSchema", "MetricSet",
    "RunConfig", "RunDistribution", "SearchSpace", "SyntheticProfile",
    "TargetSpec", "UserFeatureTable", "agreement_check",
    "apply_strategy_map", "build_plan", "cochran_n", "compute_vif",
    "drop_composites", "fit_apply_transform", "ga_optimize",
    "generate_synthetic_users", "impute_em", "impute_knn", "impute_zero",
    "kruskal_wallis", "load_config", "load_table", "pack_sequence",
    "parse_config", "pearson_r", "preprocess_post", "prune_by_vif",
    "refine_top_k", "run_benchmark", "run_hybrid_eval", "run_textprep",
    "save_table", "schema_for_rq", "score", "split_train_test", "summarize",
    "targets_for_rq", "tpe_optimize", "write_benchmark_report",
]
