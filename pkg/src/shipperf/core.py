"""Shared domain types and the resistance/power conversion.

All quantities are SI: metres, seconds, newtons, watts, radians. Knots and
degrees only appear at I/O boundaries (see :mod:`shipperf.data`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime

from .errors import DomainError, InvalidParticularsError

G = 9.81
KNOT = 1852.0 / 3600.0
RHO_WATER = 1025.0
RHO_AIR = 1.225
TWO_PI = 2.0 * math.pi

# ISO 19030 style defaults; not stated numerically anywhere authoritative for
# this package, so they are configuration only and always overridable.
DEFAULT_ETA_D = 0.7
DEFAULT_ETA_M = 0.99


def knots_to_ms(v):
    return v * 1852.0 / 3600.0


def ms_to_knots(v):
    return v * 3600.0 / 1852.0


def wrap_angle(a: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    w = math.fmod(a, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    return 0.0 if w >= TWO_PI else w


def angle_off_bow(a: float) -> float:
    """Absolute angle between a relative direction and the bow, in [0, pi]."""
    w = wrap_angle(a)
    return TWO_PI - w if w > math.pi else w


@dataclass(frozen=True)
class VesselParticulars:
    """Main particulars needed by the resistance theories.

    ``draft`` is the current mean draft; it is optional because only the
    spectral response functions need it. ``kyy`` is the pitch radius of
    gyration as a fraction of ``length_pp``.
    """

    length_overall: float
    length_pp: float
    beam: float
    block_coefficient: float
    bow_waterline_length: float
    transverse_area_laden: float
    transverse_area_ballast: float
    propulsive_efficiency: float = DEFAULT_ETA_D
    mechanical_efficiency: float = DEFAULT_ETA_M
    ship_type: str = "bulk"
    draft: float | None = None
    kyy: float = 0.25
    bow_entrance_angle: float | None = None

    def __post_init__(self):
        positive = {
            "length_overall": self.length_overall,
            "length_pp": self.length_pp,
            "beam": self.beam,
            "bow_waterline_length": self.bow_waterline_length,
            "transverse_area_laden": self.transverse_area_laden,
            "transverse_area_ballast": self.transverse_area_ballast,
            "kyy": self.kyy,
        }
        for name, value in positive.items():
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParticularsError(f"{name} must be positive, got {value!r}")
        if self.length_pp > self.length_overall:
            raise InvalidParticularsError("length_pp must not exceed length_overall")
        if not 0.0 < self.block_coefficient < 1.0:
            raise InvalidParticularsError("block_coefficient must lie in (0, 1)")
        for name in ("propulsive_efficiency", "mechanical_efficiency"):
            eta = getattr(self, name)
            if not 0.0 < eta <= 1.0:
                raise InvalidParticularsError(f"{name} must lie in (0, 1], got {eta!r}")
        if self.draft is not None and not self.draft > 0:
            raise InvalidParticularsError("draft must be positive")
        if self.bow_entrance_angle is not None and not 0 < self.bow_entrance_angle < math.pi:
            raise InvalidParticularsError("bow_entrance_angle must lie in (0, pi)")

    @property
    def efficiency(self) -> float:
        return self.propulsive_efficiency * self.mechanical_efficiency

    def with_draft(self, draft: float) -> "VesselParticulars":
        return replace(self, draft=draft)

    def transverse_area(self, draft_mean: float, laden_threshold: float) -> float:
        """Pick the laden or ballast transverse area from the mean draft."""
        if draft_mean >= laden_threshold:
            return self.transverse_area_laden
        return self.transverse_area_ballast


@dataclass(frozen=True)
class EnvironmentState:
    """Relative weather seen by the ship.

    Directions are relative to the bow: 0 means wind or waves on the bow,
    pi means from astern. They are wrapped into [0, 2*pi) on construction.
    """

    wind_speed_rel: float = 0.0
    wind_dir_rel: float = 0.0
    sig_wave_height: float = 0.0
    wave_peak_period: float = 8.0
    wave_dir_rel: float = 0.0
    water_density: float = RHO_WATER
    air_density: float = RHO_AIR

    def __post_init__(self):
        if self.wind_speed_rel < 0:
            raise DomainError("wind_speed_rel must be >= 0")
        if self.sig_wave_height < 0:
            raise DomainError("sig_wave_height must be >= 0")
        if not self.wave_peak_period > 0:
            raise DomainError("wave_peak_period must be > 0")
        object.__setattr__(self, "wind_dir_rel", wrap_angle(self.wind_dir_rel))
        object.__setattr__(self, "wave_dir_rel", wrap_angle(self.wave_dir_rel))


@dataclass(frozen=True)
class VoyageRecord:
    """One steady-state observation with its measured brake power (W)."""

    timestamp: datetime
    stw: float
    sog: float
    heading: float
    draft_aft: float
    draft_fwd: float
    displacement: float
    environment: EnvironmentState = field(default_factory=EnvironmentState)
    brake_power: float = 0.0
    water_depth: float | None = None

    def __post_init__(self):
        if self.stw < 0 or self.sog < 0:
            raise DomainError("speeds must be >= 0")
        if self.brake_power < 0:
            raise DomainError("brake_power must be >= 0")
        if not (self.draft_aft > 0 and self.draft_fwd > 0):
            raise DomainError("drafts must be > 0")

    @property
    def draft_mean(self) -> float:
        return 0.5 * (self.draft_aft + self.draft_fwd)


@dataclass(frozen=True)
class ResistanceBreakdown:
    calm: float
    wind: float = 0.0
    waves: float = 0.0

    def __post_init__(self):
        if self.calm < 0:
            raise DomainError("calm-water resistance must be >= 0")


def total_resistance(b: ResistanceBreakdown) -> float:
    return b.calm + b.wind + b.waves


def _check_efficiency(v: VesselParticulars) -> float:
    eta = v.propulsive_efficiency * v.mechanical_efficiency
    if not eta > 0:
        raise InvalidParticularsError("efficiencies must be positive")
    return eta


def brake_power(r_total: float, stw: float, v: VesselParticulars) -> float:
    """Brake power (W) needed to overcome ``r_total`` (N) at ``stw`` (m/s)."""
    if stw < 0:
        raise DomainError("stw must be >= 0")
    return r_total * stw / _check_efficiency(v)


def power_to_resistance(p: float, stw: float, v: VesselParticulars) -> float:
    """Inverse of :func:`brake_power`; undefined at zero speed."""
    if not stw > 0:
        raise DomainError("power_to_resistance needs stw > 0")
    return p * _check_efficiency(v) / stw
