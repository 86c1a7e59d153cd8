"""Exception hierarchy shared by all modules."""


class VortexBellError(Exception):
    """Base class for every error raised by this package."""


class DomainError(VortexBellError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(VortexBellError, ValueError):
    """A grid, shear or run configuration cannot support the request."""


class RangeError(VortexBellError, ValueError):
    """A value lies outside a calibrated or sampled range."""


class DataIntegrityError(VortexBellError, ValueError):
    """Measured or derived data violate a physical bound."""


class CalibrationError(VortexBellError, RuntimeError):
    """An axis or shear calibration failed its residual check."""
