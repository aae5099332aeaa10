"""Exception types shared across the toolkit.

The command line maps these onto exit codes: validation and data problems
exit 1, endpoint/provider problems exit 2, bad invocations exit 3.
"""

from __future__ import annotations


class RoadtuneError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(RoadtuneError, ValueError):
    """A function was called with an argument outside its contract."""


class DataError(RoadtuneError):
    """Input data failed validation.

    ``violations`` carries one human-readable string per problem found.
    """

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or []


class ParseError(DataError):
    """A file could not be parsed; ``index`` locates the offending unit.

    ``unit`` names what the index counts (line, element, block) and indices
    are 1-based, matching how editors number lines.
    """

    def __init__(self, message: str, unit: str = "line", index: int | None = None):
        super().__init__(message)
        self.unit = unit
        self.index = index


class ConfigError(RoadtuneError):
    """A configuration value is missing or inconsistent."""


class InvalidManifestError(DataError):
    """A layer manifest is structurally unusable (e.g. no block layers)."""


class ProviderError(RoadtuneError):
    """A scoring provider failed after retries.

    ``partial`` may carry the scores computed before the failure.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class EndpointError(RoadtuneError):
    """The chat endpoint failed terminally (auth rejection, 4xx, bad payload).

    ``partial`` may carry outputs collected before the failure.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class TransientEndpointError(RoadtuneError):
    """A retryable endpoint failure (timeout, 5xx, connection reset)."""


class GenerationShortfallError(DataError):
    """The request budget ran out before enough records were accepted.

    ``accepted`` carries the records gathered so far so callers can keep them.
    """

    def __init__(self, message: str, accepted=None):
        super().__init__(message)
        self.accepted = accepted or []
