"""
Exception types shared across the package.
"""


class LandmarkError(Exception):
    """Base class for errors raised by diagram_landmarks."""


class DataError(LandmarkError, ValueError):
    """Malformed or inconsistent input data (files, labels, diagrams)."""


class NumericGuardError(LandmarkError, ArithmeticError):
    """A numerical guard tripped (dimension caps, non-PD covariance, zero gaps)."""


class ConfigError(LandmarkError, ValueError):
    """An environment or command-line setting that cannot be parsed."""
