"""Exception types shared across the package.

Plain ``ValueError`` is raised for malformed arguments (bad shapes, out-of-range
parameters).  The classes below mark failures that a caller may want to handle
individually: configuration problems and data-dependent numerical failures.
"""


class ConfigError(ValueError):
    """A run configuration is missing, malformed, or inconsistent."""


class NumericsError(RuntimeError):
    """Base class for data-dependent numerical failures during a computation."""


class DegenerateLoopError(NumericsError):
    """A phase-winding loop passed through amplitudes too small to trust."""


class NoLatticeError(NumericsError):
    """No periodic structure detected above the correlation noise floor."""


class NoRegistrationError(NumericsError):
    """Image registration failed: correlation peak below the confidence bound."""


class DegenerateRegionError(NumericsError):
    """A mask, window, or site region has no usable statistics (empty or constant)."""


class CalibrationError(NumericsError):
    """Physical calibration metadata (pixel pitch) is unavailable."""
