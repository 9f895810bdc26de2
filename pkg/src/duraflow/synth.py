"""Synthetic accident CSV generator.

Emits the full raw-table schema (strict-mode parseable) with durations drawn
from a two-mode lognormal mixture straddling the 164-minute cut. The regime
is a crisp function of observable features (junction flag, severe weather,
heavy precipitation) and each regime has its own within-mode signal, so the
bi-level pipeline has real structure to find without the public dataset.
"""
from __future__ import annotations

import csv
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

# Real exports put Source right after ID; strict parsing only requires the
# modeling columns, so the extra column is harmless.
HEADER = [
    "ID", "Source", "Severity", "Start_Time", "End_Time", "Start_Lat", "Start_Lng",
    "End_Lat", "End_Lng", "Distance(mi)", "Description", "Number", "Street", "Side",
    "City", "County", "State", "Zipcode", "Country", "Timezone", "Airport_Code",
    "Weather_Timestamp", "Temperature(F)", "Wind_Chill(F)", "Humidity(%)",
    "Pressure(in)", "Visibility(mi)", "Wind_Direction", "Wind_Speed(mph)",
    "Precipitation(in)", "Weather_Condition", "Amenity", "Bump", "Crossing",
    "Give_Way", "Junction", "No_Exit", "Railway", "Roundabout", "Station", "Stop",
    "Traffic_Calming", "Traffic_Signal", "Turning_Loop", "Sunrise_Sunset",
    "Civil_Twilight", "Nautical_Twilight", "Astronomical_Twilight",
]

WEATHER = ["Clear", "Cloudy", "Rain", "Fog", "Storm"]
WEATHER_P = [0.40, 0.25, 0.20, 0.09, 0.06]
WIND_DIR = ["CALM", "N", "S", "E", "W", "NW", "SE"]
WIND_DIR_P = [0.25, 0.15, 0.15, 0.12, 0.12, 0.11, 0.10]
CITIES = ["Austin", "Houston", "Dallas", "San Antonio", "El Paso"]

_WINDOW_START = datetime(2016, 2, 1)
_WINDOW_END = datetime(2021, 12, 15)


def _bool(v) -> str:
    return "True" if v else "False"


def _day_night(hour: int, shift: int) -> str:
    return "Day" if (7 - shift) <= hour < (19 + shift) else "Night"


def generate_csv(path, n_rows: int, seed: int = 0) -> dict:
    """Write n_rows synthetic accident records; returns generation counts."""
    rng = np.random.default_rng(seed)

    state = rng.choice(["TX", "CA", "OK"], size=n_rows, p=[0.97, 0.02, 0.01])
    source = rng.choice(["Source1", "Source2"], size=n_rows, p=[0.98, 0.02])
    in_window = rng.random(n_rows) >= 0.03
    window_span = (_WINDOW_END - _WINDOW_START).total_seconds()
    start_offsets = rng.random(n_rows) * window_span
    early_offsets = rng.random(n_rows) * 300 * 86400.0  # scattered through 2015

    temperature = rng.normal(65.0, 15.0, n_rows)
    wind_speed = np.abs(rng.normal(8.0, 5.0, n_rows))
    wind_chill = temperature - 0.7 * wind_speed - np.abs(rng.normal(0.0, 1.5, n_rows))
    humidity = rng.uniform(20.0, 100.0, n_rows)
    pressure = rng.normal(29.9, 0.3, n_rows)
    visibility = np.clip(np.abs(rng.normal(9.0, 2.0, n_rows)), 0.2, 10.0)
    distance = np.round(rng.lognormal(-1.0, 1.0, n_rows), 3)
    weather = rng.choice(len(WEATHER), size=n_rows, p=WEATHER_P)
    wind_dir = rng.choice(WIND_DIR, size=n_rows, p=WIND_DIR_P)

    rainy = (weather == 2) | (weather == 4)
    precipitation = np.where(
        rainy,
        rng.exponential(0.12, n_rows),
        np.where(rng.random(n_rows) < 0.05, rng.exponential(0.03, n_rows), 0.0),
    )
    precipitation = np.round(precipitation, 2)

    junction = rng.random(n_rows) < 0.30
    crossing = rng.random(n_rows) < 0.22
    traffic_signal = rng.random(n_rows) < 0.18
    minor_poi = {
        name: rng.random(n_rows) < 0.04
        for name in ("amenity", "bump", "give_way", "no_exit", "railway",
                     "roundabout", "station", "stop", "traffic_calming")
    }

    # regime rule: any trigger makes the incident long-duration. Each regime
    # has its own drivers, including interactions, so branch-specialized
    # models have real structure to exploit.
    long_mode = junction | (weather >= 3) | (precipitation > 0.15)
    base_short = (
        40.0 + 1.0 * np.abs(temperature - 60.0) + 0.15 * wind_speed * (temperature > 60.0)
        + 8.0 * (weather == 2) + 6.0 * crossing
    )
    base_long = (
        280.0 + 10.0 * wind_speed + 2.0 * np.abs(humidity - 55.0)
        + 0.12 * wind_speed * np.abs(humidity - 55.0) + 25.0 * traffic_signal
    )
    noise = rng.standard_normal(n_rows)
    duration = np.where(
        long_mode,
        base_long * np.exp(0.06 * noise),
        base_short * np.exp(0.06 * noise),
    )
    duration = np.clip(duration, 3.0, None)

    missing = {
        "temperature": rng.random(n_rows) < 0.02,
        "wind_chill": rng.random(n_rows) < 0.04,
        "humidity": rng.random(n_rows) < 0.02,
        "pressure": rng.random(n_rows) < 0.02,
        "visibility": rng.random(n_rows) < 0.02,
        "wind_dir": rng.random(n_rows) < 0.02,
        "twilight": rng.random(n_rows) < 0.01,
    }

    severity = rng.integers(1, 5, n_rows)
    lat = rng.uniform(26.0, 36.0, n_rows)
    lng = rng.uniform(-106.0, -94.0, n_rows)
    city_idx = rng.integers(0, len(CITIES), n_rows)
    zipcode = rng.integers(73000, 79999, n_rows)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for i in range(n_rows):
            if in_window[i]:
                start = _WINDOW_START + timedelta(seconds=float(start_offsets[i]))
            else:
                start = datetime(2015, 1, 1) + timedelta(seconds=float(early_offsets[i]))
            start = start.replace(microsecond=0)
            end = start + timedelta(seconds=round(duration[i] * 60.0))
            ts = start.strftime("%Y-%m-%d %H:%M:%S")
            writer.writerow([
                f"A-{i + 1}",
                source[i],
                str(severity[i]),
                ts,
                end.strftime("%Y-%m-%d %H:%M:%S"),
                f"{lat[i]:.6f}",
                f"{lng[i]:.6f}",
                "", "",
                f"{distance[i]:.3f}",
                f"Synthetic incident {i + 1}",
                "",
                "I-35 N",
                "R" if i % 2 else "L",
                CITIES[city_idx[i]],
                "Travis",
                state[i],
                str(zipcode[i]),
                "US",
                "US/Central",
                "KAUS",
                ts,
                "" if missing["temperature"][i] else f"{temperature[i]:.1f}",
                "" if missing["wind_chill"][i] else f"{wind_chill[i]:.1f}",
                "" if missing["humidity"][i] else f"{humidity[i]:.1f}",
                "" if missing["pressure"][i] else f"{pressure[i]:.2f}",
                "" if missing["visibility"][i] else f"{visibility[i]:.1f}",
                "" if missing["wind_dir"][i] else wind_dir[i],
                f"{wind_speed[i]:.1f}",
                f"{precipitation[i]:.2f}",
                WEATHER[weather[i]],
                _bool(minor_poi["amenity"][i]),
                _bool(minor_poi["bump"][i]),
                _bool(crossing[i]),
                _bool(minor_poi["give_way"][i]),
                _bool(junction[i]),
                _bool(minor_poi["no_exit"][i]),
                _bool(minor_poi["railway"][i]),
                _bool(minor_poi["roundabout"][i]),
                _bool(minor_poi["station"][i]),
                _bool(minor_poi["stop"][i]),
                _bool(minor_poi["traffic_calming"][i]),
                _bool(traffic_signal[i]),
                "False",
                "" if missing["twilight"][i] else _day_night(start.hour, 0),
                _day_night(start.hour, 1),
                _day_night(start.hour, 1),
                _day_night(start.hour, 2),
            ])
    return {
        "rows": n_rows,
        "long_mode_rows": int(long_mode.sum()),
        "in_population": int((state == "TX").sum()),
    }
