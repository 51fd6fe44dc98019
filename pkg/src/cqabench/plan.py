"""Experiment plans: the feature-engineering x model x target grid."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .schema import TargetSpec


@dataclass(frozen=True)
class PlanCell:
    fe_technique: str
    model_name: str
    target_name: str

    def key(self) -> tuple[str, str, str]:
        return (self.fe_technique, self.model_name, self.target_name)


@dataclass(frozen=True)
class ExperimentPlan:
    cells: tuple[PlanCell, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.cells)


def build_plan(models: list, fe: list[str], targets: list[TargetSpec],
               seed: int) -> ExperimentPlan:
    """Full cross product of techniques, models, and targets.

    Cells are ordered lexicographically by (fe, model, target) so the plan
    is deterministic regardless of input order. Callers filter models for
    task applicability beforehand.
    """
    if not models:
        raise ConfigError("no models given for the experiment plan")
    if not fe:
        raise ConfigError("no feature-engineering techniques given")
    if not targets:
        raise ConfigError("no targets given")
    model_names = [getattr(m, "name", m) for m in models]
    if len(set(model_names)) != len(model_names):
        raise ConfigError("duplicate model names in plan input")
    if len(set(fe)) != len(fe):
        raise ConfigError("duplicate feature-engineering techniques")
    target_names = [t.name for t in targets]
    if len(set(target_names)) != len(target_names):
        raise ConfigError("duplicate targets in plan input")

    cells = tuple(
        PlanCell(f, m, t)
        for f in sorted(fe)
        for m in sorted(model_names)
        for t in sorted(target_names)
    )
    return ExperimentPlan(cells, seed)
