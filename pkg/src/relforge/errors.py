"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1 (usage/config),
DataError and its subclasses -> 2 (bad input data), anything else -> 3.
"""


class RelforgeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RelforgeError):
    """Invalid configuration: unknown rule ids, bad grids, malformed config files."""


class DataError(RelforgeError):
    """Invalid input data (records, predictions, paths)."""


class MissingFieldError(DataError):
    """A record lacks a field required by its task."""


class InvalidLabelError(DataError):
    """A record carries a label outside {0, 1}."""


class DuplicateIdError(DataError):
    """Two records in the same file share an id."""


class MalformedPathError(DataError):
    """A category path is empty or contains an empty segment."""


class ProviderContractError(DataError):
    """A translation provider returned a batch of the wrong length."""
