"""Exception types shared across the package."""


class SpoofdetError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(SpoofdetError, ValueError):
    """A configuration value is out of range or inconsistent."""


class CapacityError(ConfigurationError):
    """A preamble pool cannot supply the requested number of sequences."""


class ClusterTableError(ConfigurationError):
    """A cluster table is malformed or incompatible with the link dimensions."""


class ShapeError(SpoofdetError, ValueError):
    """An array argument has an incompatible shape."""


class PilotDivisionError(SpoofdetError, ZeroDivisionError):
    """A pilot spectrum bin is zero, so least-squares division is undefined."""


class ExtractionError(SpoofdetError, RuntimeError):
    """Sparse fingerprint extraction failed (divergence or degenerate input)."""


class InitializationError(ExtractionError):
    """The spectral initializer could not produce a usable starting point."""


class DegenerateFingerprintError(SpoofdetError, ValueError):
    """A fingerprint with zero norm was passed where a direction is required."""


class InsufficientDataError(SpoofdetError, ValueError):
    """An operation received fewer samples than it needs."""
