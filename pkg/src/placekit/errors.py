"""Exception hierarchy shared across the package."""


class PlacekitError(Exception):
    """Base class for every error raised by this package."""


class SceneError(PlacekitError):
    """Invalid scene data: bad polygon, object outside the room, bad schema."""


class MaskError(PlacekitError):
    """Mask construction or serialization failure."""


class ParseError(PlacekitError):
    """Program text could not be parsed.

    Carries the character position where parsing failed.
    """

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ValidationError(PlacekitError):
    """Structurally parseable program that violates a language rule."""


class ExecutionError(PlacekitError):
    """Program execution failed: unresolved reference, illegal constraint."""


class ExtractionError(PlacekitError):
    """Program extraction failed for an object."""


class UnconstrainedObjectError(ExtractionError):
    """No constraint at all could be derived for the query object."""


class RetryBudgetExhaustedError(PlacekitError):
    """Procedural generation could not place a required object."""


class ClassifierError(PlacekitError):
    """Classifier training or scoring failure."""


class ConfigError(PlacekitError):
    """Bad run configuration: unknown key, wrong type, out-of-range value."""


class ServiceError(PlacekitError):
    """HTTP service data-store failure."""
