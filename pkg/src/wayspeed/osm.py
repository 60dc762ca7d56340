"""OSM XML extract parsing and maxspeed normalization.

Only ``way`` elements carrying a ``highway`` tag become records; everything
else in the extract (nodes, relations, buildings) is skipped. Geometry is out
of scope — the pipeline joins on way IDs, not coordinates.
"""

from __future__ import annotations

import csv
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import IO, Iterator

from .units import MPH_TO_KMH


class MalformedXml(ValueError):
    pass


class MalformedRow(ValueError):
    pass


@dataclass(slots=True, frozen=True)
class WayRecord:
    """Metadata for one OSM way: road class plus raw and normalized maxspeed."""

    way_id: int
    highway_class: str
    maxspeed_raw: str | None = None
    maxspeed_kmh: float | None = None

    def __post_init__(self):
        if not self.highway_class:
            raise ValueError(f"way {self.way_id}: highway_class must be non-empty")
        if self.maxspeed_kmh is not None:
            if self.maxspeed_raw is None:
                raise ValueError(f"way {self.way_id}: maxspeed_kmh without maxspeed_raw")
            if not self.maxspeed_kmh > 0:
                raise ValueError(f"way {self.way_id}: maxspeed_kmh must be > 0")


@dataclass(slots=True)
class WayTable:
    """Immutable-by-convention way_id -> WayRecord map with a duplicate counter."""

    records: dict[int, WayRecord] = field(default_factory=dict)
    duplicate_count: int = 0

    def add(self, record: WayRecord) -> None:
        # last occurrence wins; extracts occasionally repeat elements
        if record.way_id in self.records:
            self.duplicate_count += 1
        self.records[record.way_id] = record

    def get(self, way_id: int) -> WayRecord | None:
        return self.records.get(way_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[WayRecord]:
        return iter(self.records.values())


_MAXSPEED_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(mph|km/h|kmh)?\s*$", re.IGNORECASE)


def parse_maxspeed(raw: str) -> float | None:
    """Normalize a maxspeed tag value to km/h.

    "<n> mph" converts by the exact factor n * 1.609344; a bare numeric is
    km/h per OSM convention, as is an explicit "km/h" suffix. Anything else —
    "none", "signals", "walk", multi-valued tags, zones — maps to None and the
    default limit gets imputed downstream. Total function, never raises.
    """
    match = _MAXSPEED_RE.match(raw)
    if match is None:
        return None
    value = float(match.group(1))
    unit = match.group(2)
    if unit is not None and unit.lower() == "mph":
        value = value * MPH_TO_KMH
    return value if value > 0 else None


def parse_osm_xml(source: IO[str] | IO[bytes] | str) -> WayTable:
    """Parse an OSM XML document or fragment into a WayTable.

    ``source`` is a path or an open file. Ways without a highway tag are
    dropped; duplicate way IDs resolve last-wins and are counted.
    """
    table = WayTable()
    try:
        for _, elem in ET.iterparse(source, events=("end",)):
            if elem.tag != "way":
                continue
            tags = {t.attrib.get("k"): t.attrib.get("v", "") for t in elem.findall("tag")}
            highway = tags.get("highway")
            if highway:
                try:
                    way_id = int(elem.attrib["id"])
                except (KeyError, ValueError) as err:
                    raise MalformedXml(f"way element without a valid id attribute: {err}") from err
                raw = tags.get("maxspeed")
                kmh = parse_maxspeed(raw) if raw is not None else None
                table.add(WayRecord(way_id, highway, raw, kmh))
            elem.clear()
    except ET.ParseError as err:
        raise MalformedXml(str(err)) from err
    return table


WAY_TABLE_HEADER = ("way_id", "highway_class", "maxspeed_raw", "maxspeed_kmh")


def format_kmh(value: float) -> str:
    """Shortest round-trip decimal form, padded to at least 6 decimals."""
    s = repr(value)
    if "e" in s or "E" in s:
        s = f"{value:.17f}"
    head, _, frac = s.partition(".")
    return f"{head}.{frac.ljust(6, '0')}"


def emit_way_table(table: WayTable, dest: IO[str]) -> int:
    """Write the way-table CSV, sorted by way_id. Returns the row count."""
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(WAY_TABLE_HEADER)
    count = 0
    for way_id in sorted(table.records):
        rec = table.records[way_id]
        writer.writerow(
            [
                str(rec.way_id),
                rec.highway_class,
                rec.maxspeed_raw if rec.maxspeed_raw is not None else "",
                format_kmh(rec.maxspeed_kmh) if rec.maxspeed_kmh is not None else "",
            ]
        )
        count += 1
    return count


def load_way_table(source: IO[str] | Iterator[str]) -> WayTable:
    """Load a way-table CSV written by emit_way_table. Round-trip identity."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != WAY_TABLE_HEADER:
        raise MalformedRow(f"way table header must be {','.join(WAY_TABLE_HEADER)}")
    table = WayTable()
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(WAY_TABLE_HEADER):
            raise MalformedRow(f"line {lineno}: expected {len(WAY_TABLE_HEADER)} fields, got {len(row)}")
        raw_id, highway, maxspeed_raw, maxspeed_kmh = row
        try:
            way_id = int(raw_id)
            kmh = float(maxspeed_kmh) if maxspeed_kmh != "" else None
        except ValueError as err:
            raise MalformedRow(f"line {lineno}: {err}") from None
        try:
            record = WayRecord(
                way_id,
                highway,
                maxspeed_raw if maxspeed_raw != "" else None,
                kmh,
            )
        except ValueError as err:
            raise MalformedRow(f"line {lineno}: {err}") from None
        table.add(record)
    return table
