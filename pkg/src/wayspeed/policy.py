"""Filtering, speed-limit augmentation, classification, and time binning.

Every rule the pipeline applies lives here as a pure function over explicit
configuration, so a run is completely described by its SpeedPolicy and
TimeBinConfig. Nothing in this module touches IO or state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal
from typing import TYPE_CHECKING

from .units import MPH_TO_KMH

if TYPE_CHECKING:
    from .ingest import TrajectoryPoint
    from .osm import WayRecord

_DEC_MPH_TO_KMH = Decimal("1.609344")

LIMIT_ROUNDING_MODES = ("exact", "paper_rounded")


class TimeBin(enum.Enum):
    DAY = "day"
    NIGHT = "night"
    OTHER = "other"


@dataclass(frozen=True)
class SpeedPolicy:
    """Speed-limit imputation default and the two violation thresholds.

    ``exact`` keeps the full mph->km/h conversion for the imputed default
    (25 mph -> 40.2336 km/h); ``paper_rounded`` rounds it to the whole km/h
    display value (40.0). The difference is 0.2336 km/h on imputed segments.
    """

    default_limit_mph: float = 25.0
    aggressive_delta_mph: float = 10.0
    reckless_delta_mph: float = 20.0
    limit_rounding: str = "exact"

    mph_to_kmh = MPH_TO_KMH

    def __post_init__(self):
        if self.default_limit_mph <= 0:
            raise ValueError("default_limit_mph must be > 0")
        if self.aggressive_delta_mph <= 0 or self.reckless_delta_mph <= 0:
            raise ValueError("speeding deltas must be > 0")
        if self.reckless_delta_mph < self.aggressive_delta_mph:
            # guarantees reckless implies aggressive
            raise ValueError("reckless_delta_mph must be >= aggressive_delta_mph")
        if self.limit_rounding not in LIMIT_ROUNDING_MODES:
            raise ValueError(f"limit_rounding must be one of {LIMIT_ROUNDING_MODES}")

    def thresholds_for(self, limit_kmh: float) -> tuple[float, float]:
        """(aggressive, reckless) thresholds in km/h for a given limit.

        Summed in decimal and rounded once: chaining double roundings lands
        one ulp off statutory boundaries (40.2336 + 16.09344 misses 56.32704),
        and classification is an inclusive >= against exactly those values.
        """
        lim = Decimal(repr(limit_kmh))
        agg = float(lim + Decimal(repr(self.aggressive_delta_mph)) * _DEC_MPH_TO_KMH)
        reck = float(lim + Decimal(repr(self.reckless_delta_mph)) * _DEC_MPH_TO_KMH)
        return agg, reck

    def imputed_limit_kmh(self) -> float:
        converted = float(Decimal(repr(self.default_limit_mph)) * _DEC_MPH_TO_KMH)
        if self.limit_rounding == "paper_rounded":
            return float(round(converted))
        return converted


@dataclass(frozen=True)
class TimeBinConfig:
    """Local-clock day/night windows, half-open on the hour.

    Defaults: day 08:00-16:00, night 21:00-05:00 (wraps midnight), fixed UTC
    offset -240 min. No DST engine — analysis windows are assumed to sit
    inside one DST regime.
    """

    day_start: int = 8
    day_end: int = 16
    night_start: int = 21
    night_end: int = 5
    utc_offset_minutes: int = -240

    def __post_init__(self):
        for name in ("day_start", "day_end", "night_start", "night_end"):
            hour = getattr(self, name)
            if not isinstance(hour, int) or not 0 <= hour < 24:
                raise ValueError(f"{name} must be an integer hour in [0, 24)")
        if self.day_start == self.day_end:
            raise ValueError("day window must be non-empty")
        if self.night_start == self.night_end:
            raise ValueError("night window must be non-empty")


@dataclass(slots=True)
class ClassifiedPoint:
    """A trajectory point joined with its effective limit and flags."""

    point: "TrajectoryPoint"
    limit_kmh: float
    limit_imputed: bool
    aggressive: bool
    reckless: bool
    bin: TimeBin

    def __post_init__(self):
        if self.reckless and not self.aggressive:
            raise ValueError("reckless implies aggressive")


def filter_postal(point: "TrajectoryPoint", allowed: frozenset[str] | set[str]) -> bool:
    """True iff the point's postal code is in the allowed set (must be non-empty)."""
    return point.postal_code in allowed


def is_residential(way: "WayRecord") -> bool:
    # exact, case-sensitive: OSM tag values are lowercase by convention
    return way.highway_class == "residential"


def effective_speed_limit(way: "WayRecord | None", policy: SpeedPolicy) -> tuple[float, bool]:
    """The per-way limit after augmentation: (limit_kmh, imputed).

    OSM maxspeed is adopted directly when present; otherwise the policy
    default applies and the limit is flagged as imputed.
    """
    if way is not None and way.maxspeed_kmh is not None:
        return way.maxspeed_kmh, False
    return policy.imputed_limit_kmh(), True


def classify_speed(speed_kmh: float, limit_kmh: float, policy: SpeedPolicy) -> tuple[bool, bool]:
    """(aggressive, reckless) flags; both comparisons are inclusive (>=)."""
    agg_threshold, reck_threshold = policy.thresholds_for(limit_kmh)
    return speed_kmh >= agg_threshold, speed_kmh >= reck_threshold


def _in_window(hour: int, start: int, end: int) -> bool:
    if start < end:
        return start <= hour < end
    return hour >= start or hour < end


def time_bin(timestamp: int, cfg: TimeBinConfig) -> TimeBin:
    """Bin an epoch timestamp by local clock hour; windows are half-open."""
    local = timestamp + cfg.utc_offset_minutes * 60
    hour = local % 86400 // 3600
    if _in_window(hour, cfg.day_start, cfg.day_end):
        return TimeBin.DAY
    if _in_window(hour, cfg.night_start, cfg.night_end):
        return TimeBin.NIGHT
    return TimeBin.OTHER


def classify_point(
    point: "TrajectoryPoint",
    way: "WayRecord | None",
    policy: SpeedPolicy,
    time_cfg: TimeBinConfig,
) -> ClassifiedPoint:
    """Convenience composition of limit augmentation, flags, and binning."""
    limit_kmh, imputed = effective_speed_limit(way, policy)
    aggressive, reckless = classify_speed(point.speed_kmh, limit_kmh, policy)
    return ClassifiedPoint(point, limit_kmh, imputed, aggressive, reckless, time_bin(point.timestamp, time_cfg))
