"""Distributed stochastic approximation with Age-of-Information delays.

Modules: :mod:`aoi` (delay processes), :mod:`schedule` (stepsizes and time
axis), :mod:`dynamics` (drifts, noise, objectives), :mod:`engine` (the
iteration), :mod:`analysis` (verifiers), :mod:`apps` (experiments),
:mod:`cli` (command line).
"""

from .aoi import AoiModel, AoiTrace, AoiValidationError, ParameterError
from .schedule import CustomSchedule, StepSchedule, TimeAxis
from .dynamics import AffineField, DimensionError, LinearField, NoiseModel, QuadraticObjective
from .engine import SimConfig, SimHistory, run, run_batch

__version__ = "0.1.0"

__all__ = [
    "AoiModel",
    "AoiTrace",
    "AoiValidationError",
    "ParameterError",
    "StepSchedule",
    "CustomSchedule",
    "TimeAxis",
    "AffineField",
    "LinearField",
    "NoiseModel",
    "QuadraticObjective",
    "DimensionError",
    "SimConfig",
    "SimHistory",
    "run",
    "run_batch",
]
