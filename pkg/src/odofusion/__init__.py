"""Odometer + map-matched GPS position fusion.

Moving fixed-interval filters and smoothers for one-dimensional vehicle
position (curvilinear abscissa), their analytic variances, a scalar Kalman
baseline and a seeded Monte-Carlo evaluation harness.
"""

__version__ = "0.1.0"

from .errors import (
    AlignmentError,
    ConfigurationError,
    ConvergenceError,
    ExperimentError,
    FusionError,
    MissingFixError,
    NoAbsoluteFixError,
    NotSPDError,
    NumericalError,
    TraceFormatError,
    WindowExceedsTraceError,
)
from .model import (
    NoiseSpec,
    SensorTrace,
    TimeGrid,
    Trajectory,
    constant_speed_trajectory,
    gps_index_after,
    gps_index_before,
    gps_phase,
    simulate_sensors,
)

__all__ = [
    "AlignmentError",
    "ConfigurationError",
    "ConvergenceError",
    "ExperimentError",
    "FusionError",
    "MissingFixError",
    "NoAbsoluteFixError",
    "NotSPDError",
    "NoiseSpec",
    "NumericalError",
    "SensorTrace",
    "TimeGrid",
    "TraceFormatError",
    "Trajectory",
    "WindowExceedsTraceError",
    "constant_speed_trajectory",
    "gps_index_after",
    "gps_index_before",
    "gps_phase",
    "simulate_sensors",
]
