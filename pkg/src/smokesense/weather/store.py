"""Plain-text weather fixtures: one CSV per station plus a registry file.

Station files: `timestamp` column (ISO-8601 UTC) followed by the 23 schema
attributes; an empty cell means missing. Registry: station_id, latitude,
longitude, network.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping

from smokesense.weather.types import (
    WEATHER_SCHEMA,
    RawWeatherRecord,
    WeatherSeries,
    WeatherStation,
    ensure_utc,
    parse_utc,
)

REGISTRY_FILENAME = "stations.csv"


def write_station_fixture(path: Path | str, series: WeatherSeries) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("timestamp",) + WEATHER_SCHEMA)
        for rec in series.records:
            row = [ensure_utc(rec.timestamp).isoformat()]
            for name in WEATHER_SCHEMA:
                v = rec.attributes.get(name)
                row.append("" if v is None else repr(float(v)))
            w.writerow(row)


def read_station_fixture(path: Path | str, cadence: float = 600.0) -> WeatherSeries:
    path = Path(path)
    station_id = path.stem
    records = []
    with path.open(newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            attrs = {
                name: (None if row[name] == "" else float(row[name]))
                for name in WEATHER_SCHEMA
                if name in row
            }
            records.append(
                RawWeatherRecord(station_id=station_id, timestamp=parse_utc(row["timestamp"]), attributes=attrs)
            )
    return WeatherSeries(station_id=station_id, records=records, cadence=cadence)


def write_station_registry(path: Path | str, stations: Iterable[WeatherStation]) -> None:
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("station_id", "latitude", "longitude", "network"))
        for st in stations:
            w.writerow((st.station_id, repr(st.latitude), repr(st.longitude), st.network))


def read_station_registry(path: Path | str) -> list[WeatherStation]:
    stations = []
    seen: set[str] = set()
    with Path(path).open(newline="") as f:
        for row in csv.DictReader(f):
            if row["station_id"] in seen:
                raise ValueError(f"duplicate station_id '{row['station_id']}' in registry")
            seen.add(row["station_id"])
            stations.append(
                WeatherStation(
                    station_id=row["station_id"],
                    latitude=float(row["latitude"]),
                    longitude=float(row["longitude"]),
                    network=row.get("network", ""),
                )
            )
    return stations


class SeriesStore(Mapping[str, WeatherSeries]):
    """Read-only station_id -> WeatherSeries map over a fixture directory."""

    def __init__(self, series: dict[str, WeatherSeries], registry: list[WeatherStation]):
        self._series = dict(series)
        self.registry = registry

    @classmethod
    def from_dir(cls, root: Path | str) -> "SeriesStore":
        root = Path(root)
        registry = read_station_registry(root / REGISTRY_FILENAME)
        series = {}
        for st in registry:
            fixture = root / f"{st.station_id}.csv"
            if fixture.exists():
                series[st.station_id] = read_station_fixture(fixture)
        return cls(series, registry)

    def __getitem__(self, station_id: str) -> WeatherSeries:
        return self._series[station_id]

    def __iter__(self):
        return iter(self._series)

    def __len__(self) -> int:
        return len(self._series)
