"""Exception hierarchy shared by every module."""


class PsdapfError(Exception):
    """Base class for all package errors."""


class InputError(PsdapfError, ValueError):
    """Malformed or non-finite input value."""


class CalibrationError(PsdapfError):
    """Not enough (or unusable) calibration data."""


class FitError(CalibrationError):
    """Regression is underdetermined."""


class ParameterError(PsdapfError, ValueError):
    """A parameter record violates one of its constraints."""


class GeometryError(PsdapfError):
    """Degenerate geometry, e.g. obstacle coincides with the end-effector."""


class LocalMinimumError(PsdapfError):
    """Net force vanished away from the goal."""

    def __init__(self, position):
        self.position = tuple(float(c) for c in position)
        super().__init__(f"local minimum at {self.position}")


class ScenarioError(PsdapfError):
    """Scenario document failed to load or validate."""
