"""Streaming per-way aggregation and the way-level summary rows.

Accumulators are single-pass (Welford mean/M2) and mergeable, so the stream
can be sharded by input chunk or by way and combined at the end. The naive
two-pass computation lives in the synth oracle, deliberately not here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator

from .policy import ClassifiedPoint, TimeBin


class WayMismatch(ValueError):
    pass


class EmptyAccumulator(ValueError):
    pass


@dataclass(slots=True)
class WayAccumulator:
    """Mergeable per-way counters plus running mean/M2 of speed."""

    way_id: int
    limit_kmh: float
    limit_imputed: bool
    n: int = 0
    day_n: int = 0
    night_n: int = 0
    day_aggressive_n: int = 0
    night_aggressive_n: int = 0
    aggressive_n: int = 0
    reckless_n: int = 0
    mean: float = 0.0
    m2: float = 0.0


@dataclass(slots=True, frozen=True)
class WaySummary:
    """One output row per way. Field names match the summary CSV header."""

    osm_way_id: int
    total_row_number: int
    added_speed_limit: float
    total_morning_count: int
    total_night_count: int
    morning_speeding_count: int
    night_speeding_count: int
    way_id_avg_speed: float
    way_id_speed_sd: float | None
    aggressive_speeding_row_number: int
    reckless_speeding_row_number: int
    aggressive_speeding_percent: float
    reckless_speeding_percent: float


def accumulate(acc: WayAccumulator, cp: ClassifiedPoint) -> WayAccumulator:
    """Fold one classified point into the accumulator (mutates and returns it).

    Day/night speeding counters track aggressive events only — that is what
    the summary schema's morning/night speeding columns mean. Points binned
    Other contribute to totals and flag counters but not to the day/night
    columns.
    """
    if cp.point.way_id != acc.way_id:
        raise WayMismatch(f"point way {cp.point.way_id} fed to accumulator for way {acc.way_id}")
    if cp.limit_kmh != acc.limit_kmh:
        raise WayMismatch(f"limit {cp.limit_kmh} differs from accumulator limit {acc.limit_kmh}")
    speed = cp.point.speed_kmh
    acc.n += 1
    delta = speed - acc.mean
    acc.mean += delta / acc.n
    acc.m2 += delta * (speed - acc.mean)
    if cp.bin is TimeBin.DAY:
        acc.day_n += 1
        if cp.aggressive:
            acc.day_aggressive_n += 1
    elif cp.bin is TimeBin.NIGHT:
        acc.night_n += 1
        if cp.aggressive:
            acc.night_aggressive_n += 1
    if cp.aggressive:
        acc.aggressive_n += 1
        if cp.reckless:
            acc.reckless_n += 1
    return acc


def merge(a: WayAccumulator, b: WayAccumulator) -> WayAccumulator:
    """Combine two accumulators over disjoint point sets (parallel merge).

    The mean uses the weighted form and M2 the pairwise update, both of which
    are bitwise symmetric in a and b, so merge commutes exactly on every field.
    """
    if a.way_id != b.way_id:
        raise WayMismatch(f"cannot merge ways {a.way_id} and {b.way_id}")
    if a.limit_kmh != b.limit_kmh or a.limit_imputed != b.limit_imputed:
        raise WayMismatch(f"way {a.way_id}: merge requires equal limits")
    if b.n == 0:
        return replace(a)
    if a.n == 0:
        return replace(b)
    n = a.n + b.n
    mean = (a.mean * a.n + b.mean * b.n) / n
    delta = b.mean - a.mean
    m2 = a.m2 + b.m2 + delta * delta * (a.n * b.n / n)
    return WayAccumulator(
        way_id=a.way_id,
        limit_kmh=a.limit_kmh,
        limit_imputed=a.limit_imputed,
        n=n,
        day_n=a.day_n + b.day_n,
        night_n=a.night_n + b.night_n,
        day_aggressive_n=a.day_aggressive_n + b.day_aggressive_n,
        night_aggressive_n=a.night_aggressive_n + b.night_aggressive_n,
        aggressive_n=a.aggressive_n + b.aggressive_n,
        reckless_n=a.reckless_n + b.reckless_n,
        mean=mean,
        m2=m2,
    )


def finalize(acc: WayAccumulator) -> WaySummary:
    """Close out an accumulator into a summary row.

    Speed SD is the sample (n-1) standard deviation and is absent for
    single-point ways. Percentages are count * 100 / total.
    """
    if acc.n == 0:
        raise EmptyAccumulator(f"way {acc.way_id} has no points")
    sd = math.sqrt(acc.m2 / (acc.n - 1)) if acc.n >= 2 else None
    return WaySummary(
        osm_way_id=acc.way_id,
        total_row_number=acc.n,
        added_speed_limit=acc.limit_kmh,
        total_morning_count=acc.day_n,
        total_night_count=acc.night_n,
        morning_speeding_count=acc.day_aggressive_n,
        night_speeding_count=acc.night_aggressive_n,
        way_id_avg_speed=acc.mean,
        way_id_speed_sd=sd,
        aggressive_speeding_row_number=acc.aggressive_n,
        reckless_speeding_row_number=acc.reckless_n,
        aggressive_speeding_percent=acc.aggressive_n * 100.0 / acc.n,
        reckless_speeding_percent=acc.reckless_n * 100.0 / acc.n,
    )


def aggregate_stream(points: Iterable[ClassifiedPoint]) -> list[WaySummary]:
    """One summary per distinct way observed, sorted by way_id."""
    accs: dict[int, WayAccumulator] = {}
    for cp in points:
        way_id = cp.point.way_id
        acc = accs.get(way_id)
        if acc is None:
            acc = accs[way_id] = WayAccumulator(way_id, cp.limit_kmh, cp.limit_imputed)
        accumulate(acc, cp)
    return [finalize(accs[way_id]) for way_id in sorted(accs)]


SUMMARY_HEADER = (
    "osm_way_id",
    "total_row_number",
    "added_speed_limit",
    "total_morning_count",
    "total_night_count",
    "morning_speeding_count",
    "night_speeding_count",
    "way_id_avg_speed",
    "way_id_speed_sd",
    "aggressive_speeding_row_number",
    "reckless_speeding_row_number",
    "aggressive_speeding_percent",
    "reckless_speeding_percent",
)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def write_summary_csv(summaries: Iterable[WaySummary], dest: IO[str]) -> int:
    """Write summary rows; reals carry 6 decimals so reruns are byte-stable."""
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    count = 0
    for s in summaries:
        writer.writerow(
            [
                str(s.osm_way_id),
                str(s.total_row_number),
                _fmt(s.added_speed_limit),
                str(s.total_morning_count),
                str(s.total_night_count),
                str(s.morning_speeding_count),
                str(s.night_speeding_count),
                _fmt(s.way_id_avg_speed),
                _fmt(s.way_id_speed_sd) if s.way_id_speed_sd is not None else "",
                str(s.aggressive_speeding_row_number),
                str(s.reckless_speeding_row_number),
                _fmt(s.aggressive_speeding_percent),
                _fmt(s.reckless_speeding_percent),
            ]
        )
        count += 1
    return count


class MalformedSummaryRow(ValueError):
    pass


def load_summary_csv(source: IO[str] | Iterator[str]) -> list[WaySummary]:
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SUMMARY_HEADER:
        raise MalformedSummaryRow(f"summary header must be {','.join(SUMMARY_HEADER)}")
    out: list[WaySummary] = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(SUMMARY_HEADER):
            raise MalformedSummaryRow(f"line {lineno}: expected {len(SUMMARY_HEADER)} fields")
        try:
            out.append(
                WaySummary(
                    osm_way_id=int(row[0]),
                    total_row_number=int(row[1]),
                    added_speed_limit=float(row[2]),
                    total_morning_count=int(row[3]),
                    total_night_count=int(row[4]),
                    morning_speeding_count=int(row[5]),
                    night_speeding_count=int(row[6]),
                    way_id_avg_speed=float(row[7]),
                    way_id_speed_sd=float(row[8]) if row[8] != "" else None,
                    aggressive_speeding_row_number=int(row[9]),
                    reckless_speeding_row_number=int(row[10]),
                    aggressive_speeding_percent=float(row[11]),
                    reckless_speeding_percent=float(row[12]),
                )
            )
        except ValueError as err:
            raise MalformedSummaryRow(f"line {lineno}: {err}") from None
    return out
