"""Parsing and filtering of the raw accident-record CSV schema.

The parser is a streaming transform: each data row becomes either one
``RawAccidentRecord`` or one ``RowDiagnostic``, never both, so
``len(records) + len(diagnostics)`` always equals the number of data rows.
Records keep the original cell text so a parsed batch can be re-emitted
with identical headers and field bytes.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

from .exceptions import MissingHeader

# Canonical column registry: (csv_name, attribute, kind). Kinds drive both
# cell parsing here and feature encoding downstream.
CORE_COLUMNS: tuple[tuple[str, str, str], ...] = (
    ("ID", "id", "id"),
    ("Severity", "severity", "int"),
    ("Start_Time", "start_time", "timestamp"),
    ("End_Time", "end_time", "timestamp"),
    ("State", "state", "text"),
    ("Source", "source_tag", "text"),
)

MODELING_COLUMNS: tuple[tuple[str, str, str], ...] = (
    ("Distance(mi)", "distance_mi", "numeric"),
    ("Temperature(F)", "temperature_f", "numeric"),
    ("Wind_Chill(F)", "wind_chill_f", "numeric"),
    ("Humidity(%)", "humidity_pct", "numeric"),
    ("Pressure(in)", "pressure_in", "numeric"),
    ("Visibility(mi)", "visibility_mi", "numeric"),
    ("Wind_Direction", "wind_direction", "categorical"),
    ("Wind_Speed(mph)", "wind_speed_mph", "numeric"),
    ("Precipitation(in)", "precipitation_in", "numeric"),
    ("Weather_Condition", "weather_condition", "categorical"),
    ("Amenity", "amenity", "boolean"),
    ("Bump", "bump", "boolean"),
    ("Crossing", "crossing", "boolean"),
    ("Give_Way", "give_way", "boolean"),
    ("Junction", "junction", "boolean"),
    ("No_Exit", "no_exit", "boolean"),
    ("Railway", "railway", "boolean"),
    ("Roundabout", "roundabout", "boolean"),
    ("Station", "station", "boolean"),
    ("Stop", "stop", "boolean"),
    ("Traffic_Calming", "traffic_calming", "boolean"),
    ("Traffic_Signal", "traffic_signal", "boolean"),
    ("Turning_Loop", "turning_loop", "boolean"),
    ("Sunrise_Sunset", "sunrise_sunset", "daynight"),
    ("Civil_Twilight", "civil_twilight", "daynight"),
    ("Nautical_Twilight", "nautical_twilight", "daynight"),
    ("Astronomical_Twilight", "astronomical_twilight", "daynight"),
)

# Remaining raw-schema columns; parsed as opaque text, kept only for re-emission.
PASSTHROUGH_COLUMNS: tuple[str, ...] = (
    "Start_Lat", "Start_Lng", "End_Lat", "End_Lng", "Description", "Number",
    "Street", "Side", "City", "County", "Zipcode", "Country", "Timezone",
    "Airport_Code", "Weather_Timestamp",
)

KNOWN_COLUMNS: dict[str, tuple[str, str]] = {
    name: (attr, kind) for name, attr, kind in CORE_COLUMNS + MODELING_COLUMNS
}

# Columns a strict-mode file must declare: the mandatory trio plus everything
# the pipeline reads. "Source" is not part of the raw table schema, so a file
# without it still parses (records simply carry no source tag).
REQUIRED_COLUMNS: tuple[str, ...] = (
    "ID", "Start_Time", "End_Time", "State",
) + tuple(name for name, _, _ in MODELING_COLUMNS)

MANDATORY_FIELDS = ("ID", "Start_Time", "End_Time")

# The public dataset labels its first feed "Source1"; the value is config
# overridable because exports differ across dataset versions.
DEFAULT_SOURCE_TAG = "Source1"

_EPOCH_MIN = datetime(2016, 2, 1, 0, 0, 0)
_EPOCH_MAX = datetime(2021, 12, 31, 23, 59, 59)


@dataclass(frozen=True, slots=True)
class RawAccidentRecord:
    """One parsed accident row. Everything except id/start/end may be absent."""

    id: str
    start_time: datetime
    end_time: datetime
    severity: int | None = None
    state: str | None = None
    source_tag: str | None = None
    distance_mi: float | None = None
    temperature_f: float | None = None
    wind_chill_f: float | None = None
    humidity_pct: float | None = None
    pressure_in: float | None = None
    visibility_mi: float | None = None
    wind_direction: str | None = None
    wind_speed_mph: float | None = None
    precipitation_in: float | None = None
    weather_condition: str | None = None
    amenity: bool | None = None
    bump: bool | None = None
    crossing: bool | None = None
    give_way: bool | None = None
    junction: bool | None = None
    no_exit: bool | None = None
    railway: bool | None = None
    roundabout: bool | None = None
    station: bool | None = None
    stop: bool | None = None
    traffic_calming: bool | None = None
    traffic_signal: bool | None = None
    turning_loop: bool | None = None
    sunrise_sunset: str | None = None
    civil_twilight: str | None = None
    nautical_twilight: str | None = None
    astronomical_twilight: str | None = None
    raw_cells: tuple[str, ...] = field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class RowDiagnostic:
    """A rejected data row: physical line number plus the first failure reason."""

    line: int
    reason: str


@dataclass(frozen=True)
class FilterSpec:
    """Study-population filter: state, feed tag, and start-time window."""

    state_code: str = "TX"
    source_tag: str | None = DEFAULT_SOURCE_TAG
    date_min: datetime = _EPOCH_MIN
    date_max: datetime = _EPOCH_MAX

    def __post_init__(self):
        if self.date_min > self.date_max:
            raise ValueError("date_min must not exceed date_max")


@dataclass
class ParseResult:
    records: list[RawAccidentRecord]
    diagnostics: list[RowDiagnostic]
    header: list[str]

    @property
    def row_count(self) -> int:
        return len(self.records) + len(self.diagnostics)


def parse_timestamp(text: str) -> datetime:
    """Parse a naive local 'YYYY-MM-DD HH:MM:SS' timestamp.

    Fractional seconds of any length are accepted; digits beyond microseconds
    are truncated.
    """
    base, dot, frac = text.partition(".")
    dt = datetime.strptime(base, "%Y-%m-%d %H:%M:%S")
    if dot:
        if not frac.isdigit():
            raise ValueError(f"bad fractional seconds in timestamp: {text!r}")
        micros = int(frac[:6].ljust(6, "0"))
        dt = dt.replace(microsecond=micros)
    return dt


def format_timestamp(dt: datetime) -> str:
    if dt.microsecond:
        return dt.strftime("%Y-%m-%d %H:%M:%S.%f")
    return dt.strftime("%Y-%m-%d %H:%M:%S")


def _parse_cell(kind: str, name: str, text: str):
    if kind in ("text", "categorical", "daynight"):
        return text
    if kind == "numeric":
        return float(text)
    if kind == "int":
        value = int(text)
        if name == "Severity" and not 1 <= value <= 4:
            raise ValueError(f"severity out of range: {value}")
        return value
    if kind == "boolean":
        low = text.strip().lower()
        if low == "true":
            return True
        if low == "false":
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "timestamp":
        return parse_timestamp(text)
    if kind == "id":
        return text
    raise AssertionError(f"unhandled kind {kind}")


def _resolve_header(header: Sequence[str], policy: str) -> dict[str, int]:
    """Map canonical column names to positions in the file's header."""
    positions: dict[str, int] = {}
    if policy == "strict":
        for i, cell in enumerate(header):
            if cell in KNOWN_COLUMNS and cell not in positions:
                positions[cell] = i
        missing = [c for c in REQUIRED_COLUMNS if c not in positions]
        if missing:
            raise MissingHeader(f"required columns absent: {', '.join(missing)}")
    elif policy == "lenient":
        folded = {}
        for i, cell in enumerate(header):
            key = cell.strip().casefold()
            if key not in folded:
                folded[key] = i
        for name in KNOWN_COLUMNS:
            i = folded.get(name.casefold())
            if i is not None:
                positions[name] = i
        missing = [c for c in MANDATORY_FIELDS if c not in positions]
        if missing:
            raise MissingHeader(f"mandatory columns absent: {', '.join(missing)}")
    else:
        raise ValueError(f"header_policy must be 'strict' or 'lenient', got {policy!r}")
    return positions


def _open_text(source) -> tuple[io.TextIOBase, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _compile_row_parser(header: Sequence[str], policy: str, keep_raw: bool):
    """Header resolution plus a per-row closure returning (record, diagnostic)."""
    positions = _resolve_header(header, policy)
    plan = [
        (name, attr, kind, positions.get(name), name in MANDATORY_FIELDS)
        for name, (attr, kind) in KNOWN_COLUMNS.items()
    ]
    width = len(header)
    seen_ids: set[str] = set()

    def parse_row(row: list[str], line: int):
        if len(row) > width:
            return None, RowDiagnostic(line, "row has more cells than header")
        kwargs: dict = {}
        for name, attr, kind, pos, mandatory in plan:
            text = row[pos] if pos is not None and pos < len(row) else ""
            if not text or text.isspace():
                if mandatory:
                    return None, RowDiagnostic(line, f"mandatory field {name} is empty")
                continue
            try:
                kwargs[attr] = _parse_cell(kind, name, text)
            except ValueError as exc:
                prefix = "mandatory field" if mandatory else "field"
                return None, RowDiagnostic(line, f"{prefix} {name} unparseable: {exc}")
        if kwargs["id"] in seen_ids:
            return None, RowDiagnostic(line, f"duplicate id {kwargs['id']!r}")
        seen_ids.add(kwargs["id"])
        if keep_raw:
            kwargs["raw_cells"] = tuple(row) + ("",) * (width - len(row))
        return RawAccidentRecord(**kwargs), None

    return parse_row


def _iter_rows(source, header_policy: str, keep_raw: bool):
    """Yields header first, then (record, diagnostic) pairs per data row."""
    stream, owned = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader("input has no header row") from None
        parse_row = _compile_row_parser(header, header_policy, keep_raw)
        yield list(header)
        for row in reader:
            if not row:
                continue  # blank line, not a data row
            yield parse_row(row, reader.line_num)
    finally:
        if owned:
            stream.close()


def parse_records(source, header_policy: str = "strict") -> ParseResult:
    """Parse a CSV stream (path or text file object) into records + diagnostics.

    Column order in the file is irrelevant; cells are located by header name.
    Rows whose mandatory fields (ID, Start_Time, End_Time) are missing or
    malformed, or that carry an unparseable optional value or a duplicate ID,
    become diagnostics instead of records. Every data row lands in exactly one
    of the two lists.
    """
    rows = _iter_rows(source, header_policy, keep_raw=True)
    header = next(rows)
    records: list[RawAccidentRecord] = []
    diagnostics: list[RowDiagnostic] = []
    for record, diag in rows:
        if record is not None:
            records.append(record)
        else:
            diagnostics.append(diag)
    return ParseResult(records=records, diagnostics=diagnostics, header=header)


def stream_filtered_records(
    source, spec: FilterSpec, header_policy: str = "strict", keep_raw: bool = False
) -> tuple[list[RawAccidentRecord], list[RowDiagnostic], list[str], int]:
    """Single-pass parse + filter that never materializes non-matching rows.

    Semantics match parse_records followed by filter_records; this path exists
    because the full national file is millions of rows while the study
    population is a small fraction of it. Returns (kept records, diagnostics,
    header, total data-row count). Raw cell text is dropped unless keep_raw.
    """
    rows = _iter_rows(source, header_policy, keep_raw)
    header = next(rows)
    kept: list[RawAccidentRecord] = []
    diagnostics: list[RowDiagnostic] = []
    total = 0
    for record, diag in rows:
        total += 1
        if record is None:
            diagnostics.append(diag)
        elif _matches(record, spec):
            kept.append(record)
    return kept, diagnostics, header, total


def _matches(rec: RawAccidentRecord, spec: FilterSpec) -> bool:
    return (
        rec.state == spec.state_code
        and (spec.source_tag is None or rec.source_tag == spec.source_tag)
        and spec.date_min <= rec.start_time <= spec.date_max
    )


def filter_records(
    records: Iterable[RawAccidentRecord], spec: FilterSpec
) -> list[RawAccidentRecord]:
    """Keep records matching state, source tag, and start-time window, in order."""
    return [rec for rec in records if _matches(rec, spec)]


def write_records_csv(records: Sequence[RawAccidentRecord], header: Sequence[str], dest) -> None:
    """Re-emit records under the original header, preserving raw cell text."""
    stream, owned = (open(dest, "w", encoding="utf-8", newline=""), True) \
        if isinstance(dest, (str, Path)) else (dest, False)
    try:
        writer = csv.writer(stream)
        writer.writerow(list(header))
        width = len(header)
        for rec in records:
            if not rec.raw_cells:
                raise ValueError(
                    f"record {rec.id} was parsed without raw cells; "
                    "re-emission needs keep_raw parsing"
                )
            row = list(rec.raw_cells[:width])
            row += [""] * (width - len(row))
            writer.writerow(row)
    finally:
        if owned:
            stream.close()


