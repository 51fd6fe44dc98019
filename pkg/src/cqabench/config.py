"""Declarative run configuration.

A run config is one YAML (or JSON) document naming the data source, the
research question, the imputation strategy map (column patterns allowed),
the feature-engineering and model lists, search budgets, the repeated-run
count, and the master seed. The config hash in every report is the SHA-256
of the canonicalised document, so provenance changes exactly when the
config content does.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, SchemaError
from .features import FE_TECHNIQUES
from .impute import EmParams, ImputationStrategy, KnnParams, StrategyMap
from .models import specs_for_task
from .schema import FeatureSchema, schema_for_rq, targets_for_rq
from .synth import EM_GROUP, KNN_GROUP, SyntheticProfile

RQS = ("RQ1", "RQ2", "RQ3")


@dataclass(frozen=True)
class HpoBudgets:
    tpe_trials: int = 100
    tpe_startup: int = 10
    ga_population: int = 20
    ga_generations: int = 25
    top_k: int = 5


@dataclass(frozen=True)
class EvalSettings:
    runs: int = 100
    split_ratio: float = 0.8
    alpha: float = 0.01
    include_baselines: bool = True


@dataclass(frozen=True)
class RunConfig:
    rq: str
    seed: int = 42
    output: str = "out"
    source: str = "synthetic"  # "synthetic" or a tabular-file path
    synthetic_n: int = 1000
    profile: SyntheticProfile = field(default_factory=SyntheticProfile)
    strategy_entries: tuple[tuple[str, str], ...] = ()  # pattern -> kind
    knn_params: KnnParams = field(default_factory=KnnParams)
    em_params: EmParams = field(default_factory=EmParams)
    fe: tuple[str, ...] = FE_TECHNIQUES
    models: tuple[str, ...] = ()  # empty means every applicable model
    vif_threshold: float = 5.0
    hpo: HpoBudgets = field(default_factory=HpoBudgets)
    evaluation: EvalSettings = field(default_factory=EvalSettings)
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def task(self) -> str:
        return "classification" if self.rq == "RQ3" else "regression"

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def model_names(self) -> list[str]:
        applicable = [s.name for s in specs_for_task(self.task)]
        if not self.models:
            return applicable
        for name in self.models:
            if name not in applicable:
                raise ConfigError(
                    f"model {name!r} is not applicable to {self.rq} "
                    f"({self.task})"
                )
        return list(self.models)


def default_strategy_entries() -> tuple[tuple[str, str], ...]:
    """The study's column-to-strategy assignments, as pattern entries."""
    zero = ("ProfileLength", "UpVotes", "DownVotes", "Views", "Reputation",
            "Questions", "Answers", "Code Length", "* Violation Density")
    entries = [(name, "zero") for name in zero]
    entries += [(name, "knn") for name in KNN_GROUP]
    entries += [(name, "em") for name in EM_GROUP]
    return tuple(entries)


def resolve_strategy_map(entries, schema: FeatureSchema,
                         knn_params: KnnParams,
                         em_params: EmParams) -> StrategyMap:
    """Expand pattern entries against a schema into explicit assignments.

    A column matched by two entries is a configuration error; patterns that
    match nothing are ignored (different research questions carry different
    column subsets).
    """
    assignments: dict[str, ImputationStrategy] = {}
    strategies = {
        "zero": ImputationStrategy("zero"),
        "knn": ImputationStrategy("knn", knn=knn_params),
        "em": ImputationStrategy("em", em=em_params),
    }
    for pattern, kind in entries:
        if kind not in strategies:
            raise ConfigError(f"unknown imputation strategy {kind!r} "
                              f"for {pattern!r}")
        matched = [n for n in schema.names if fnmatch.fnmatch(n, pattern)]
        if not matched and not any(ch in pattern for ch in "*?["):
            continue  # explicit name absent from this schema subset
        for name in matched:
            if name in assignments:
                raise SchemaError(
                    f"column {name!r} assigned to two imputation strategies"
                )
            assignments[name] = strategies[kind]
    return StrategyMap(assignments)


def _require(mapping: dict, key: str, origin: str):
    if key not in mapping:
        raise ConfigError(f"{origin}: missing required key {key!r}")
    return mapping[key]


def parse_config(raw: dict, origin: str = "<config>") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{origin}: config must be a mapping")
    rq = str(_require(raw, "rq", origin))
    if rq not in RQS:
        raise ConfigError(f"{origin}: rq must be one of {RQS}, got {rq!r}")

    data = raw.get("data", {}) or {}
    source = str(data.get("source", "synthetic"))
    synth = data.get("synthetic", {}) or {}
    profile_raw = synth.get("profile", {}) or {}
    try:
        profile = SyntheticProfile.from_mapping(profile_raw)
    except TypeError as exc:
        raise ConfigError(f"{origin}: bad synthetic profile ({exc})") from None

    imputation = raw.get("imputation", {}) or {}
    entries_raw = imputation.get("strategy_map")
    if entries_raw is None:
        entries = default_strategy_entries()
    else:
        entries = tuple((str(k), str(v)) for k, v in entries_raw.items())
    knn_raw = imputation.get("knn", {}) or {}
    em_raw = imputation.get("em", {}) or {}
    knn_params = KnnParams(**{k: v for k, v in knn_raw.items()})
    em_params = EmParams(**{k: v for k, v in em_raw.items()})

    feats = raw.get("features", {}) or {}
    fe = tuple(str(f) for f in feats.get("fe", FE_TECHNIQUES))
    for technique in fe:
        if technique not in FE_TECHNIQUES:
            raise ConfigError(f"{origin}: unknown FE technique {technique!r}")

    hpo_raw = raw.get("hpo", {}) or {}
    eval_raw = raw.get("evaluation", {}) or {}
    try:
        hpo = HpoBudgets(**{k: int(v) for k, v in hpo_raw.items()})
        evaluation = EvalSettings(
            runs=int(eval_raw.get("runs", 100)),
            split_ratio=float(eval_raw.get("split_ratio", 0.8)),
            alpha=float(eval_raw.get("alpha", 0.01)),
            include_baselines=bool(eval_raw.get("include_baselines", True)),
        )
    except TypeError as exc:
        raise ConfigError(f"{origin}: bad budget settings ({exc})") from None
    if evaluation.runs < 1:
        raise ConfigError(f"{origin}: evaluation.runs must be >= 1")

    config = RunConfig(
        rq=rq,
        seed=int(raw.get("seed", 42)),
        output=str(raw.get("output", "out")),
        source=source,
        synthetic_n=int(synth.get("n", 1000)),
        profile=profile,
        strategy_entries=entries,
        knn_params=knn_params,
        em_params=em_params,
        fe=fe,
        models=tuple(str(m) for m in raw.get("models", []) or []),
        vif_threshold=float(feats.get("vif_threshold", 5.0)),
        hpo=hpo,
        evaluation=evaluation,
        raw=raw,
    )
    config.model_names()  # applicability check happens before any execution
    if config.source == "synthetic" and config.synthetic_n < 10:
        raise ConfigError(f"{origin}: synthetic n must be at least 10")
    return config


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with path.open("r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return parse_config(raw, origin=str(path))


def schema_and_targets(config: RunConfig):
    schema = schema_for_rq(config.rq)
    targets = targets_for_rq(config.rq)
    schema.validate_targets(targets)
    return schema, targets
