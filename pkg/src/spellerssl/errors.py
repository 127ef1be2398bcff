"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigurationError -> 2,
DataIntegrityError -> 3, NumericError -> 4. Everything else is a plain
bug and propagates as-is.
"""


class SpellerError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(SpellerError):
    """Tensor shapes or dimensions do not satisfy an operation's contract."""


class ConfigurationError(SpellerError):
    """A run/model/filter configuration is invalid or infeasible."""


class DataIntegrityError(SpellerError):
    """Stored or in-memory data violates a structural invariant."""


class FormatError(DataIntegrityError):
    """A binary file is malformed (bad magic, version, or truncation)."""


class LabelError(SpellerError):
    """A class label lies outside the supported set."""


class StateError(SpellerError):
    """Optimizer or model state is missing or inconsistent."""


class LoadError(SpellerError):
    """A checkpoint cannot be applied to the target model."""


class StatisticsError(SpellerError):
    """A statistic is undefined for the given sample sizes."""


class NumericError(SpellerError):
    """Training produced non-finite values."""


class CollationError(SpellerError):
    """Report rows cannot be merged (duplicate keys, missing files)."""
