"""Column schemas, target declarations, and the default study layouts.

A schema lists the named numeric columns of a user-feature table, the role
each column plays (predictor, target, or excluded composite), and which
prediction tasks a target column serves. The three research-question
layouts (RQ1/RQ2/RQ3) are built from one master column set.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import SchemaError

LANGUAGES = ("SQL", "JavaScript", "Python", "Ruby", "Java")
QUALITY_DIMENSIONS = ("Reliability", "Readability", "Performance", "Security")

#: Composite columns that are plain sums of other columns and are dropped
#: before multicollinearity screening (their addends stay).
COMPOSITE_COLUMNS = ("User Development Index", "User Management Index")


class Role(enum.Enum):
    PREDICTOR = "predictor"
    TARGET = "target"
    EXCLUDED_COMPOSITE = "excluded-composite"


@dataclass(frozen=True)
class ColumnSpec:
    """One named numeric column.

    ``task_targets`` names the research questions a target column serves;
    it is empty for predictors. ``nominal`` marks two-category text columns
    that are encoded 0/1 at load time.
    """

    name: str
    role: Role = Role.PREDICTOR
    task_targets: frozenset[str] = field(default_factory=frozenset)
    nominal: bool = False


@dataclass(frozen=True)
class TargetSpec:
    """A prediction target: its column name, task kind, and research question."""

    name: str
    task: str  # "regression" | "classification"
    rq: str  # "RQ1" | "RQ2" | "RQ3"

    def __post_init__(self) -> None:
        if self.task not in ("regression", "classification"):
            raise SchemaError(f"unknown task {self.task!r}")
        if self.rq not in ("RQ1", "RQ2", "RQ3"):
            raise SchemaError(f"unknown research question {self.rq!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered column layout of a user-feature table."""

    columns: tuple[ColumnSpec, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SchemaError(f"duplicate column names: {sorted(dupes)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown column {name!r}") from None

    def column(self, name: str) -> ColumnSpec:
        return self.columns[self.index(name)]

    def predictor_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.role is Role.PREDICTOR)

    def target_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.role is Role.TARGET)

    def composite_names(self) -> tuple[str, ...]:
        return tuple(
            c.name for c in self.columns if c.role is Role.EXCLUDED_COMPOSITE
        )

    def validate_targets(self, targets: list[TargetSpec]) -> None:
        """Check that every declared target exists and is flagged as one."""
        for t in targets:
            if t.name not in self:
                raise SchemaError(f"target column {t.name!r} missing from schema")
            col = self.column(t.name)
            if col.role is not Role.TARGET:
                raise SchemaError(f"column {t.name!r} is not a target column")
            if t.rq not in col.task_targets:
                raise SchemaError(
                    f"column {t.name!r} does not serve {t.rq} "
                    f"(serves {sorted(col.task_targets)})"
                )

    def without(self, names: set[str]) -> "FeatureSchema":
        return FeatureSchema(
            tuple(c for c in self.columns if c.name not in names)
        )


def violation_density_columns() -> tuple[str, ...]:
    """The 20 per-language, per-dimension code-quality columns."""
    return tuple(
        f"{lang} {dim} Violation Density"
        for lang in LANGUAGES
        for dim in QUALITY_DIMENSIONS
    )


#: The 20 RQ1 predictor columns, in screening-report order.
RQ1_PREDICTORS = (
    "Post Attention to Detail",
    "Post Readability",
    "Badges",
    "User Contribution Frequency",
    "Reputation",
    "YearlyDurationUsage",
    "User Profile Completion Rate",
    "Questions",
    "Comments",
    "Edits",
    "About Me Polarity",
    "ProfileLength",
    "Views",
    "UpVotes",
    "User Popularity Index",
    "Comment Polarity",
    "Answer Polarity",
    "Question Polarity",
    "Code Length",
    "DownVotes",
)


def _column(name: str, role: Role = Role.PREDICTOR, rqs: tuple[str, ...] = (),
            nominal: bool = False) -> ColumnSpec:
    return ColumnSpec(name, role, frozenset(rqs), nominal)


def user_table_schema() -> FeatureSchema:
    """Master schema with every study variable, targets and composites included."""
    cols: list[ColumnSpec] = [
        _column("Gender", nominal=True),
        _column("ProfileLength"),
        _column("YearlyDurationUsage"),
        _column("UpVotes"),
        _column("DownVotes"),
        _column("Views"),
        _column("Reputation"),
        _column("Questions"),
        _column("Answers", Role.TARGET, ("RQ1",)),
        _column("Comments"),
        _column("Edits"),
        _column("Badges"),
        _column("User Development Index", Role.EXCLUDED_COMPOSITE),
        _column("User Management Index", Role.EXCLUDED_COMPOSITE),
        _column("User Contribution Frequency"),
        _column("User Disengagement Rate"),
        _column("Post Readability"),
        _column("Post Attention to Detail"),
        _column("About Me Polarity"),
        _column("Comment Polarity"),
        _column("Question Polarity"),
        _column("Answer Polarity"),
        _column("User Profile Completion Rate"),
        _column("Code Length"),
        _column("User Popularity Index"),
        _column("Dropout", Role.TARGET, ("RQ3",)),
    ]
    cols += [
        _column(name, Role.TARGET, ("RQ2",))
        for name in violation_density_columns()
    ]
    return FeatureSchema(tuple(cols))


def rq1_schema() -> FeatureSchema:
    """20 predictors, the activity target, and the two composites."""
    cols = [_column(n) for n in RQ1_PREDICTORS]
    cols += [_column(n, Role.EXCLUDED_COMPOSITE) for n in COMPOSITE_COLUMNS]
    cols.append(_column("Answers", Role.TARGET, ("RQ1",)))
    return FeatureSchema(tuple(cols))


def rq2_schema() -> FeatureSchema:
    """RQ1 predictors plus the activity column, targeting the 20 quality columns."""
    cols = [_column(n) for n in RQ1_PREDICTORS]
    cols.append(_column("Answers"))
    cols += [_column(n, Role.EXCLUDED_COMPOSITE) for n in COMPOSITE_COLUMNS]
    cols += [
        _column(name, Role.TARGET, ("RQ2",))
        for name in violation_density_columns()
    ]
    return FeatureSchema(tuple(cols))


def rq3_schema() -> FeatureSchema:
    """41 predictors (RQ2 set plus the quality columns), binary dropout target."""
    cols = [_column(n) for n in RQ1_PREDICTORS]
    cols.append(_column("Answers"))
    cols += [_column(name) for name in violation_density_columns()]
    cols += [_column(n, Role.EXCLUDED_COMPOSITE) for n in COMPOSITE_COLUMNS]
    cols.append(_column("Dropout", Role.TARGET, ("RQ3",)))
    return FeatureSchema(tuple(cols))


def schema_for_rq(rq: str) -> FeatureSchema:
    try:
        return {"RQ1": rq1_schema, "RQ2": rq2_schema, "RQ3": rq3_schema}[rq]()
    except KeyError:
        raise SchemaError(f"unknown research question {rq!r}") from None


def targets_for_rq(rq: str) -> list[TargetSpec]:
    """Declared targets per research question: 1 / 20 / 1."""
    if rq == "RQ1":
        return [TargetSpec("Answers", "regression", "RQ1")]
    if rq == "RQ2":
        return [
            TargetSpec(name, "regression", "RQ2")
            for name in violation_density_columns()
        ]
    if rq == "RQ3":
        return [TargetSpec("Dropout", "classification", "RQ3")]
    raise SchemaError(f"unknown research question {rq!r}")
