"""Exception types shared across the package."""


class CqaBenchError(Exception):
    """Base class for all package errors."""


class SchemaError(CqaBenchError):
    """A table or column does not conform to its declared schema."""


class ParseError(CqaBenchError):
    """An input file could not be parsed."""


class ConfigError(CqaBenchError):
    """A run configuration is invalid or inconsistent."""


class ImputationError(CqaBenchError):
    """An imputation strategy cannot be applied to its column(s)."""


class UndefinedStatisticError(CqaBenchError):
    """A statistic is undefined for the given input (e.g. constant data)."""


class NotFittedError(CqaBenchError):
    """predict/transform was called before fit."""


class TaskError(CqaBenchError):
    """A model was asked to perform a task it does not support."""


class NonConvergenceError(CqaBenchError):
    """A fit failed to reach a finite solution; the grid cell is reported N/A."""


class OptimizationError(CqaBenchError):
    """A hyperparameter search could not produce any successful trial."""
