"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`DeepGbError`
so the CLI can map it to an exit code in one place.
"""


class DeepGbError(Exception):
    """Base class for all package errors."""


class ConfigError(DeepGbError, ValueError):
    """Invalid configuration value, unknown key or unsupported option."""


class ParseError(DeepGbError, ValueError):
    """Malformed input file content."""


class SpacingError(DeepGbError, ValueError):
    """Timestamps are not uniformly spaced."""


class SplitError(DeepGbError, ValueError):
    """Not enough data for the requested train/test split."""


class ShapeError(DeepGbError, ValueError):
    """Input shape or cardinality does not match a fitted model."""


class TrainingError(DeepGbError, RuntimeError):
    """Optimisation diverged or otherwise failed."""


class MetricError(DeepGbError, ValueError):
    """Metric called on incompatible inputs."""


class ModelFormatError(DeepGbError, ValueError):
    """Serialized model could not be read."""
