from __future__ import annotations

import csv
import io

import numpy as np
import pytest

from duraflow.synth import HEADER

BASE_ROW = {
    "ID": "A-1",
    "Source": "Source1",
    "Severity": "2",
    "Start_Time": "2019-06-01 08:00:00",
    "End_Time": "2019-06-01 09:00:00",
    "Start_Lat": "30.1",
    "Start_Lng": "-97.7",
    "Distance(mi)": "0.25",
    "Description": "lane blocked",
    "Street": "I-35",
    "Side": "R",
    "City": "Austin",
    "County": "Travis",
    "State": "TX",
    "Zipcode": "78701",
    "Country": "US",
    "Timezone": "US/Central",
    "Airport_Code": "KAUS",
    "Weather_Timestamp": "2019-06-01 08:00:00",
    "Temperature(F)": "75.0",
    "Wind_Chill(F)": "73.0",
    "Humidity(%)": "60.0",
    "Pressure(in)": "29.9",
    "Visibility(mi)": "10.0",
    "Wind_Direction": "S",
    "Wind_Speed(mph)": "5.0",
    "Precipitation(in)": "0.0",
    "Weather_Condition": "Clear",
    "Amenity": "False",
    "Bump": "False",
    "Crossing": "False",
    "Give_Way": "False",
    "Junction": "False",
    "No_Exit": "False",
    "Railway": "False",
    "Roundabout": "False",
    "Station": "False",
    "Stop": "False",
    "Traffic_Calming": "False",
    "Traffic_Signal": "False",
    "Turning_Loop": "False",
    "Sunrise_Sunset": "Day",
    "Civil_Twilight": "Day",
    "Nautical_Twilight": "Day",
    "Astronomical_Twilight": "Day",
}


def make_raw_csv(rows: list[dict], header=None) -> str:
    """CSV text in the full raw schema; each dict overrides BASE_ROW fields."""
    header = list(header) if header is not None else list(HEADER)
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(header)
    for i, overrides in enumerate(rows):
        row = dict(BASE_ROW)
        row["ID"] = f"A-{i + 1}"
        row.update(overrides)
        writer.writerow([row.get(col, "") for col in header])
    return out.getvalue()


@pytest.fixture
def raw_csv_factory():
    return make_raw_csv


@pytest.fixture
def rng():
    return np.random.default_rng(20240315)
