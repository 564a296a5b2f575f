"""Expression- and attention-aware potential-field motion planning."""

from .errors import (
    CalibrationError,
    FitError,
    GeometryError,
    InputError,
    LocalMinimumError,
    ParameterError,
    PsdapfError,
    ScenarioError,
)
from .planner import PlannerMode, PlannerParams
from .sim import load_scenario, run

__all__ = [
    "CalibrationError", "FitError", "GeometryError", "InputError", "LocalMinimumError",
    "ParameterError", "PsdapfError", "ScenarioError",
    "PlannerMode", "PlannerParams", "load_scenario", "run",
]
__version__ = "0.1.0"
