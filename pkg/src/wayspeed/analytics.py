"""Network-level reports over finalized way summaries.

Everything here is a pure function over an immutable list of WaySummary rows:
empirical CDFs of speeding percentages, tail shares, anonymized top-N tables,
the day/night rate comparison, and crash-frequency histograms.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from itertools import groupby
from typing import IO, Iterable, Iterator, Sequence

from .aggregate import WaySummary
from .osm import MalformedRow, WayTable
from .policy import is_residential

METRICS = ("aggressive", "reckless")


class EmptyInput(ValueError):
    pass


def metric_value(summary: WaySummary, metric: str) -> float:
    if metric == "aggressive":
        return summary.aggressive_speeding_percent
    if metric == "reckless":
        return summary.reckless_speeding_percent
    raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


def filter_min_observations(
    summaries: Sequence[WaySummary], min_rows: int = 100
) -> list[WaySummary]:
    """Drop sparsely observed ways; the bound is inclusive (>= min_rows stays)."""
    if min_rows < 1:
        raise ValueError("min_rows must be >= 1")
    return [s for s in summaries if s.total_row_number >= min_rows]


@dataclass(frozen=True)
class CdfSeries:
    """Empirical CDF of a speeding-percent metric across segments.

    ``points`` holds (value, cumulative fraction) at every distinct value,
    strictly increasing in value, ending at fraction 1.0.
    """

    metric_name: str
    points: tuple[tuple[float, float], ...]

    def evaluate(self, x: float) -> float:
        """F(x): fraction of segments with metric <= x."""
        values = [v for v, _ in self.points]
        idx = bisect_right(values, x)
        if idx == 0:
            return 0.0
        return self.points[idx - 1][1]


def compute_cdf(summaries: Sequence[WaySummary], metric: str) -> CdfSeries:
    if not summaries:
        raise EmptyInput("cannot compute a CDF over zero summaries")
    values = sorted(metric_value(s, metric) for s in summaries)
    total = len(values)
    points: list[tuple[float, float]] = []
    seen = 0
    for value, group in groupby(values):
        seen += sum(1 for _ in group)
        points.append((value, seen / total))
    return CdfSeries(metric_name=metric, points=tuple(points))


def fraction_exceeding(summaries: Sequence[WaySummary], metric: str, x: float) -> float:
    """Share of segments above a speeding-percent level.

    x == 0 means "at least one instance" and uses a strict > 0; x > 0 means
    "at least x percent" and is inclusive (>= x).
    """
    if not summaries:
        raise EmptyInput("cannot compute a fraction over zero summaries")
    if x == 0:
        count = sum(1 for s in summaries if metric_value(s, metric) > 0.0)
    else:
        count = sum(1 for s in summaries if metric_value(s, metric) >= x)
    return count / len(summaries)


@dataclass(frozen=True)
class AnonymizedRow:
    alias: str
    total_rows: int
    percent: float
    avg_speed_kmh: float
    speed_sd_kmh: float | None
    speed_limit_kmh: float


@dataclass(frozen=True)
class AnonymizedTable:
    metric_name: str
    rows: tuple[AnonymizedRow, ...]
    alias_map: dict[int, str]


def rank(summaries: Sequence[WaySummary], metric: str, n: int) -> list[WaySummary]:
    """Top n by metric, deterministic: ties break by total rows desc, way_id asc."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ordered = sorted(
        summaries,
        key=lambda s: (-metric_value(s, metric), -s.total_row_number, s.osm_way_id),
    )
    return ordered[:n]


def _alias_for(index: int) -> str:
    # a..z, then aa, ab, ...
    out = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        out = chr(ord("a") + rem) + out
    return out


def anonymize(tables: Sequence[Sequence[WaySummary]]) -> dict[int, str]:
    """Assign letters by first appearance across tables in presentation order.

    A way appearing in several tables keeps one alias; the map is scoped to
    one report, never global.
    """
    alias_map: dict[int, str] = {}
    for table in tables:
        for summary in table:
            if summary.osm_way_id not in alias_map:
                alias_map[summary.osm_way_id] = _alias_for(len(alias_map))
    return alias_map


def top_n(
    summaries: Sequence[WaySummary],
    metric: str,
    n: int = 10,
    alias_map: dict[int, str] | None = None,
) -> AnonymizedTable:
    """Anonymized top-n table; pass a shared alias_map to keep aliases stable
    across the tables of one report."""
    ranked = rank(summaries, metric, n)
    if alias_map is None:
        alias_map = anonymize([ranked])
    rows = tuple(
        AnonymizedRow(
            alias=alias_map[s.osm_way_id],
            total_rows=s.total_row_number,
            percent=metric_value(s, metric),
            avg_speed_kmh=s.way_id_avg_speed,
            speed_sd_kmh=s.way_id_speed_sd,
            speed_limit_kmh=s.added_speed_limit,
        )
        for s in ranked
    )
    return AnonymizedTable(metric_name=metric, rows=rows, alias_map=alias_map)


@dataclass(frozen=True)
class DayNightResult:
    higher_day: int
    higher_night: int
    excluded: int


def day_night_comparison(summaries: Sequence[WaySummary]) -> DayNightResult:
    """Tally ways by whether the day or night aggressive rate is higher.

    Rates are speeding count over total count for the same period. Ways with
    an empty period or equal rates (including both zero) are excluded, never
    silently dropped. Rates compare by integer cross-multiplication so ties
    are exact.
    """
    higher_day = higher_night = excluded = 0
    for s in summaries:
        t_day, t_night = s.total_morning_count, s.total_night_count
        if t_day == 0 or t_night == 0:
            excluded += 1
            continue
        day_side = s.morning_speeding_count * t_night
        night_side = s.night_speeding_count * t_day
        if day_side > night_side:
            higher_day += 1
        elif night_side > day_side:
            higher_night += 1
        else:
            excluded += 1
    return DayNightResult(higher_day, higher_night, excluded)


@dataclass(slots=True, frozen=True)
class CrashRecord:
    way_id: int
    crash_date: str = ""


@dataclass(frozen=True)
class CrashFrequencyTable:
    """Histogram of residential ways by crash count.

    ``no_info`` counts residential ways with zero matched crashes; ``dropped``
    counts crash records on non-residential or unknown ways.
    """

    rows: dict[int, int]
    no_info: int
    dropped: int = 0


def crash_frequency(crashes: Iterable[CrashRecord], way_table: WayTable) -> CrashFrequencyTable:
    residential = {rec.way_id for rec in way_table if is_residential(rec)}
    per_way: Counter[int] = Counter()
    dropped = 0
    for crash in crashes:
        if crash.way_id in residential:
            per_way[crash.way_id] += 1
        else:
            dropped += 1
    rows = Counter(per_way.values())
    return CrashFrequencyTable(
        rows=dict(sorted(rows.items())),
        no_info=len(residential) - len(per_way),
        dropped=dropped,
    )


CRASH_INPUT_HEADER = ("way_id", "crash_date")


def load_crash_csv(source: IO[str] | Iterator[str]) -> Iterator[CrashRecord]:
    """Yield crash records; the crash_date column is carried but unused here."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CRASH_INPUT_HEADER:
        raise MalformedRow(f"crash CSV header must be {','.join(CRASH_INPUT_HEADER)}")
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 2:
            raise MalformedRow(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            yield CrashRecord(way_id=int(row[0]), crash_date=row[1])
        except ValueError:
            raise MalformedRow(f"line {lineno}: way_id must be an integer") from None


CDF_HEADER = ("value_percent", "cum_fraction")


def write_cdf_csv(series: CdfSeries, dest: IO[str]) -> int:
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(CDF_HEADER)
    for value, fraction in series.points:
        writer.writerow([repr(value), repr(fraction)])
    return len(series.points)


TOP_N_HEADER = ("alias", "total_rows", "percent", "avg_speed_kmh", "speed_sd_kmh", "speed_limit_kmh")


def write_top_n_csv(table: AnonymizedTable, dest: IO[str]) -> int:
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(TOP_N_HEADER)
    for row in table.rows:
        writer.writerow(
            [
                row.alias,
                str(row.total_rows),
                f"{row.percent:.2f}",
                f"{row.avg_speed_kmh:.2f}",
                f"{row.speed_sd_kmh:.2f}" if row.speed_sd_kmh is not None else "",
                f"{row.speed_limit_kmh:.2f}",
            ]
        )
    return len(table.rows)


CRASH_OUTPUT_HEADER = ("crashes", "way_count")


def write_crash_csv(table: CrashFrequencyTable, dest: IO[str]) -> int:
    """Histogram rows ascending by crash count, then the no_info row."""
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(CRASH_OUTPUT_HEADER)
    for crash_count in sorted(table.rows):
        writer.writerow([str(crash_count), str(table.rows[crash_count])])
    writer.writerow(["no_info", str(table.no_info)])
    return len(table.rows) + 1
