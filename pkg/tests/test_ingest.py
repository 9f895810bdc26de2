import io
from datetime import datetime

import pytest

from duraflow.exceptions import MissingHeader
from duraflow.ingest import (
    FilterSpec,
    parse_records,
    filter_records,
    parse_timestamp,
    write_records_csv,
)
from duraflow.synth import HEADER

from conftest import make_raw_csv


def parse_text(text, policy="strict"):
    return parse_records(io.StringIO(text), policy)


def test_missing_end_time_becomes_diagnostic():
    text = make_raw_csv([{}, {"End_Time": ""}, {}])
    result = parse_text(text)
    assert len(result.records) == 2
    assert len(result.diagnostics) == 1
    assert "End_Time" in result.diagnostics[0].reason
    assert result.row_count == 3


def test_strict_mode_requires_id_column():
    header = [c for c in HEADER if c != "ID"]
    text = make_raw_csv([{}], header=header)
    with pytest.raises(MissingHeader):
        parse_text(text)


def test_no_header_row():
    with pytest.raises(MissingHeader):
        parse_text("")


def test_nullable_field_parses_as_absent():
    result = parse_text(make_raw_csv([{"Temperature(F)": ""}]))
    assert len(result.records) == 1
    assert result.records[0].temperature_f is None


def test_field_values_parse_with_types():
    rec = parse_text(make_raw_csv([{}])).records[0]
    assert rec.id == "A-1"
    assert rec.severity == 2
    assert rec.start_time == datetime(2019, 6, 1, 8, 0, 0)
    assert rec.temperature_f == 75.0
    assert rec.junction is False
    assert rec.sunrise_sunset == "Day"
    assert rec.source_tag == "Source1"


def test_lenient_header_matches_case_and_whitespace():
    text = make_raw_csv([{}])
    body = text.split("\r\n", 1)[1]
    mangled = ",".join(" id " if c == "ID" else c.lower() for c in HEADER)
    text = mangled + "\r\n" + body
    with pytest.raises(MissingHeader):
        parse_text(text, "strict")
    result = parse_text(text, "lenient")
    assert len(result.records) == 1
    assert result.records[0].id == "A-1"


def test_unparseable_optional_field_is_diagnostic():
    result = parse_text(make_raw_csv([{"Temperature(F)": "warm"}, {}]))
    assert len(result.records) == 1
    assert len(result.diagnostics) == 1
    assert "Temperature(F)" in result.diagnostics[0].reason


def test_duplicate_id_is_diagnostic():
    result = parse_text(make_raw_csv([{}, {"ID": "A-1"}]))
    assert len(result.records) == 1
    assert "duplicate" in result.diagnostics[0].reason


def test_severity_out_of_range_is_diagnostic():
    result = parse_text(make_raw_csv([{"Severity": "7"}]))
    assert len(result.records) == 0
    assert "Severity" in result.diagnostics[0].reason


def test_fractional_second_timestamps():
    assert parse_timestamp("2019-06-01 08:00:00.123456789") == datetime(
        2019, 6, 1, 8, 0, 0, 123456
    )
    assert parse_timestamp("2019-06-01 08:00:00.5") == datetime(2019, 6, 1, 8, 0, 0, 500000)


def test_diagnostic_plus_record_count_covers_all_rows():
    rows = [{}, {"End_Time": "nonsense"}, {"ID": ""}, {}, {"Severity": "9"}]
    result = parse_text(make_raw_csv(rows))
    assert result.row_count == len(rows)


def test_filter_by_state_source_and_window():
    text = make_raw_csv([
        {"State": "TX"},
        {"State": "CA"},
        {"State": "TX", "Source": "Source2"},
        {"State": "TX", "Start_Time": "2015-12-01 08:00:00",
         "End_Time": "2015-12-01 09:00:00"},
    ])
    records = parse_text(text).records
    kept = filter_records(records, FilterSpec())
    assert [r.id for r in kept] == ["A-1"]


def test_filter_is_idempotent_and_order_preserving():
    text = make_raw_csv([{"State": "TX"}, {"State": "TX"}, {"State": "OK"}])
    records = parse_text(text).records
    spec = FilterSpec()
    once = filter_records(records, spec)
    twice = filter_records(once, spec)
    assert once == twice
    assert [r.id for r in once] == ["A-1", "A-2"]


def test_filter_spec_validates_window():
    with pytest.raises(ValueError):
        FilterSpec(date_min=datetime(2020, 1, 1), date_max=datetime(2019, 1, 1))


def test_source_filter_disabled_with_none():
    text = make_raw_csv([{"Source": "Source2"}])
    records = parse_text(text).records
    assert filter_records(records, FilterSpec(source_tag=None)) == records


def test_roundtrip_preserves_field_bytes():
    rows = [{"Temperature(F)": "73"}, {"Wind_Chill(F)": ""}, {"Weather_Condition": "Light Rain"}]
    text = make_raw_csv(rows)
    first = parse_text(text)
    out = io.StringIO()
    write_records_csv(first.records, first.header, out)
    second = parse_text(out.getvalue())
    assert len(second.records) == len(first.records)
    assert second.header == first.header
    for a, b in zip(first.records, second.records):
        assert a.raw_cells == b.raw_cells
        assert a == b


def test_streaming_filter_matches_two_pass():
    from duraflow.ingest import stream_filtered_records

    text = make_raw_csv([
        {"State": "TX"},
        {"State": "CA"},
        {"State": "TX", "End_Time": ""},
        {"State": "TX", "Source": "Source2"},
        {"State": "TX"},
    ])
    result = parse_text(text)
    expected = filter_records(result.records, FilterSpec())
    kept, diagnostics, header, total = stream_filtered_records(
        io.StringIO(text), FilterSpec(), "strict", keep_raw=True
    )
    assert kept == expected
    assert len(diagnostics) == len(result.diagnostics)
    assert header == result.header
    assert total == result.row_count


def test_reemit_requires_raw_cells():
    from duraflow.ingest import stream_filtered_records

    text = make_raw_csv([{"State": "TX"}])
    kept, _, header, _ = stream_filtered_records(
        io.StringIO(text), FilterSpec(), "strict", keep_raw=False
    )
    with pytest.raises(ValueError):
        write_records_csv(kept, header, io.StringIO())


def test_extra_cells_are_diagnostic():
    text = make_raw_csv([{}])
    lines = text.splitlines()
    lines[1] += ",surplus"
    result = parse_text("\n".join(lines) + "\n")
    assert len(result.diagnostics) == 1
    assert "more cells" in result.diagnostics[0].reason
