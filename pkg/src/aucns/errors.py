"""Typed errors raised across the package.

Every error a caller may want to catch programmatically gets its own class;
all inherit from AucnsError so CLI entry points can catch one base type.
"""


class AucnsError(Exception):
    """Base class for all package errors."""


class ParseError(AucnsError):
    """A dataset line failed to parse; carries the 1-based line number."""

    def __init__(self, path, line_number, reason):
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")


class EmptyDatasetError(AucnsError):
    """Dataset file or record list contained no usable interactions."""


class DegenerateDatasetError(AucnsError):
    """Dataset statistics unusable (e.g. pop_max == 0 for the prior)."""


class ConfigError(AucnsError):
    """Configuration value out of bounds or unknown; names field and bound."""


class SamplerError(AucnsError):
    """Negative sampler precondition violated (e.g. empty candidate pool)."""


class TrainingError(AucnsError):
    """Non-finite values or other failures during optimization."""


class NumericalDegeneracyError(AucnsError):
    """A numerical guard fired (e.g. vanishing posterior denominator)."""


class UndefinedMetricError(AucnsError):
    """A metric's denominator population is empty (e.g. no test positives)."""


class ExperimentError(AucnsError):
    """Wraps a failure inside run_experiment with the pipeline stage name."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")


def reject_unknown_keys(mapping, allowed, context):
    """Raise ConfigError if mapping holds keys outside `allowed`."""
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")
