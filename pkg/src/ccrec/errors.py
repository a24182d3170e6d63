"""Exception types shared across the package."""


class CCRecError(Exception):
    """Base class; ``category`` is the machine-parsable tag the CLI prints."""

    category = "error"


class DimensionError(CCRecError, ValueError):
    category = "dimension"


class NumericError(CCRecError, FloatingPointError):
    category = "numeric"


class ConfigError(CCRecError, ValueError):
    category = "config"


class EmptySequenceError(CCRecError, ValueError):
    category = "empty_sequence"


class TargetError(CCRecError, IndexError):
    category = "target"


class ContractError(CCRecError, RuntimeError):
    category = "contract"


class MissingArtifactError(CCRecError, FileNotFoundError):
    category = "missing_prerequisite"


class DataError(CCRecError, ValueError):
    category = "data"
