"""Trajectory record ingestion with explicit error accounting.

The wire format is header-bearing CSV: ``timestamp,lat,lon,speed_kmh,way_id,
postal_code``. Columns may appear in any order; the header decides. Parsing is
tolerant by default (malformed rows are counted and skipped) because large
telematics feeds always contain dirt; strict mode aborts on the first bad row.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

TRAJECTORY_HEADER = ("timestamp", "lat", "lon", "speed_kmh", "way_id", "postal_code")

# rejection reason tokens, used as keys in IngestStats.rejection_reasons
MISSING_FIELD = "missing_field"
NON_NUMERIC = "non_numeric"
OUT_OF_RANGE = "out_of_range"
NEGATIVE_SPEED = "negative_speed"
NON_FINITE_SPEED = "non_finite_speed"

ERROR_POLICIES = ("skip", "strict")


class SourceUnreadable(ValueError):
    """The source cannot be interpreted as a trajectory CSV at all."""


class RowError(ValueError):
    """One rejected trajectory row. ``reason`` is a stable counter token."""

    def __init__(self, reason: str, field_name: str, detail: str = ""):
        msg = f"{reason} ({field_name})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.reason = reason
        self.field_name = field_name


@dataclass(slots=True)
class TrajectoryPoint:
    """One 3-second vehicle observation."""

    timestamp: int
    lat: float
    lon: float
    speed_kmh: float
    way_id: int
    postal_code: str


@dataclass
class IngestStats:
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejection_reasons: dict[str, int] = field(default_factory=dict)
    # points at or above the advisory speed threshold; marked, never dropped
    advisory_flagged: int = 0

    def combine(self, other: "IngestStats") -> "IngestStats":
        """Sum per-shard stats. Supports sharded ingestion."""
        self.rows_read += other.rows_read
        self.rows_accepted += other.rows_accepted
        self.rows_rejected += other.rows_rejected
        self.advisory_flagged += other.advisory_flagged
        for reason, count in other.rejection_reasons.items():
            self.rejection_reasons[reason] = self.rejection_reasons.get(reason, 0) + count
        return self


def column_indices(header: Sequence[str]) -> tuple[int, int, int, int, int, int]:
    """Map a header row to source indices, in canonical field order."""
    cleaned = [name.strip() for name in header]
    try:
        return tuple(cleaned.index(name) for name in TRAJECTORY_HEADER)  # type: ignore[return-value]
    except ValueError:
        missing = [name for name in TRAJECTORY_HEADER if name not in cleaned]
        raise SourceUnreadable(f"header is missing columns: {', '.join(missing)}") from None


def _parse_fields(fields: Sequence[str], idx: tuple[int, int, int, int, int, int]) -> TrajectoryPoint:
    i_ts, i_lat, i_lon, i_spd, i_way, i_pc = idx
    n = len(fields)
    for pos, name in zip(idx, TRAJECTORY_HEADER):
        if pos >= n or fields[pos] == "":
            raise RowError(MISSING_FIELD, name)
    try:
        ts = int(fields[i_ts])
    except ValueError:
        raise RowError(NON_NUMERIC, "timestamp", fields[i_ts]) from None
    try:
        lat = float(fields[i_lat])
    except ValueError:
        raise RowError(NON_NUMERIC, "lat", fields[i_lat]) from None
    try:
        lon = float(fields[i_lon])
    except ValueError:
        raise RowError(NON_NUMERIC, "lon", fields[i_lon]) from None
    try:
        spd = float(fields[i_spd])
    except ValueError:
        raise RowError(NON_NUMERIC, "speed_kmh", fields[i_spd]) from None
    try:
        way_id = int(fields[i_way])
    except ValueError:
        raise RowError(NON_NUMERIC, "way_id", fields[i_way]) from None

    if not math.isfinite(spd):
        raise RowError(NON_FINITE_SPEED, "speed_kmh", fields[i_spd])
    if spd < 0.0:
        raise RowError(NEGATIVE_SPEED, "speed_kmh", fields[i_spd])
    if not -90.0 <= lat <= 90.0:
        raise RowError(OUT_OF_RANGE, "lat", fields[i_lat])
    if not -180.0 <= lon <= 180.0:
        raise RowError(OUT_OF_RANGE, "lon", fields[i_lon])
    if ts <= 0:
        raise RowError(OUT_OF_RANGE, "timestamp", fields[i_ts])
    if way_id < 0:
        raise RowError(OUT_OF_RANGE, "way_id", fields[i_way])
    return TrajectoryPoint(ts, lat, lon, spd, way_id, fields[i_pc])


_DEFAULT_IDX = tuple(range(len(TRAJECTORY_HEADER)))


def parse_trajectory_row(
    line: str | Sequence[str], schema: Sequence[str] = TRAJECTORY_HEADER
) -> TrajectoryPoint:
    """Parse one delimited record into a TrajectoryPoint.

    ``line`` is either a raw CSV line or an already-split field list; ``schema``
    gives the column order. Raises RowError naming the offending field.
    """
    if isinstance(line, str):
        fields: Sequence[str] = next(csv.reader([line]), [])
    else:
        fields = line
    if schema is TRAJECTORY_HEADER:
        idx = _DEFAULT_IDX
    else:
        idx = column_indices(schema)
    return _parse_fields(fields, idx)  # type: ignore[arg-type]


def stream_trajectories(
    source: IO[str] | Iterable[str],
    error_policy: str = "skip",
    advisory_speed_kmh: float | None = None,
) -> tuple[Iterator[TrajectoryPoint], IngestStats]:
    """Stream points out of a trajectory CSV, accounting for every row.

    Returns the point iterator plus a stats object that is filled in while the
    iterator is consumed; totals are final once it is exhausted and always
    satisfy rows_read == rows_accepted + rows_rejected. ``skip`` counts and
    drops malformed rows; ``strict`` re-raises the first RowError.
    """
    if error_policy not in ERROR_POLICIES:
        raise ValueError(f"error_policy must be one of {ERROR_POLICIES}, got {error_policy!r}")
    stats = IngestStats()

    def points() -> Iterator[TrajectoryPoint]:
        reader = csv.reader(source)
        header = next(reader, None)
        if header is None:
            raise SourceUnreadable("empty source: no header row")
        idx = column_indices(header)
        strict = error_policy == "strict"
        reasons = stats.rejection_reasons
        for row in reader:
            stats.rows_read += 1
            try:
                point = _parse_fields(row, idx)
            except RowError as err:
                stats.rows_rejected += 1
                reasons[err.reason] = reasons.get(err.reason, 0) + 1
                if strict:
                    raise
                continue
            stats.rows_accepted += 1
            if advisory_speed_kmh is not None and point.speed_kmh >= advisory_speed_kmh:
                stats.advisory_flagged += 1
            yield point

    return points(), stats


def format_trajectory_row(point: TrajectoryPoint) -> list[str]:
    """Canonical CSV cells for a point; floats round-trip exactly."""
    return [
        str(point.timestamp),
        repr(point.lat),
        repr(point.lon),
        repr(point.speed_kmh),
        str(point.way_id),
        point.postal_code,
    ]


def write_trajectory_csv(points: Iterable[TrajectoryPoint], dest: IO[str]) -> int:
    """Write points in the canonical column order. Returns the row count."""
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    count = 0
    for point in points:
        writer.writerow(format_trajectory_row(point))
        count += 1
    return count
