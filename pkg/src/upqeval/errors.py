"""Error categories raised by the evaluation engine.

Loaders and validators raise distinct subclasses so callers (and the CLI
exit-code mapping) can tell input problems apart from structural ones.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class StructuralIntegrityError(EngineError):
    """A raster violates an internal invariant (e.g. one segment id, two classes)."""


class DimensionMismatchError(EngineError):
    """Two rasters that must share dimensions do not."""


class FormatError(EngineError):
    """A file payload is malformed (wrong bit depth, bad pixel values, ...)."""


class SchemaVersionError(FormatError):
    """A manifest or report declares an unsupported schema version."""


class ValidationError(EngineError):
    """Inputs are well-formed but inconsistent (bad config, missing samples, ...)."""
