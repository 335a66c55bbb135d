"""Speed-power modelling of ships from in-service monitoring data."""

from .core import (
    EnvironmentState,
    ResistanceBreakdown,
    VesselParticulars,
    VoyageRecord,
    brake_power,
    power_to_resistance,
    total_resistance,
)

__version__ = "0.1.0"

__all__ = [
    "EnvironmentState",
    "ResistanceBreakdown",
    "VesselParticulars",
    "VoyageRecord",
    "brake_power",
    "power_to_resistance",
    "total_resistance",
]
