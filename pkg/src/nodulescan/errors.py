"""Exception hierarchy for the pipeline.

Each subclass carries the process exit code used by the CLI, grouped by
family: configuration (2), missing inputs (3), malformed data (4),
dataset/metric problems (5). Anything unexpected exits 1.
"""


class PipelineError(Exception):
    exit_code = 1


class ConfigError(PipelineError):
    """Invalid configuration value or inconsistent option combination."""

    exit_code = 2


class MissingInput(PipelineError):
    """A required input file or directory does not exist."""

    exit_code = 3


class DataError(PipelineError):
    """Malformed or out-of-contract numeric data."""

    exit_code = 4


class DegenerateSignal(DataError):
    """Channel with (near-)zero variance; normalization is undefined."""


class WindowTooLarge(DataError):
    """Envelope window does not fit inside the signal."""


class ShapeMismatch(DataError):
    """Operands do not share the required dimensions."""


class TraceTooLong(DataError):
    """Trace has more samples than the fixed matrix width allows."""


class DatasetError(PipelineError):
    """Problems at the dataset or metric level."""

    exit_code = 5


class EmptyFitSet(DatasetError):
    """No fitted parameter sets to average."""


class MissingClass(DatasetError):
    """A required nodule-size class has no traces."""


class EmptyResults(DatasetError):
    """No detection results to aggregate."""


class UndefinedMetric(DatasetError):
    """Metric denominator is zero; the rate is reported as absent."""
