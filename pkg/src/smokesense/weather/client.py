"""Mesonet-style timeseries client.

`replay` mode (default) serves windows out of local fixture files and is
what every test and desk-scale run uses. `live` mode issues HTTP queries
against a Synoptic-compatible endpoint with a token taken from an
environment variable; it exists for real-corpus ingestion and is not
exercised by the test suite.
"""

from __future__ import annotations

import os
from datetime import datetime
from pathlib import Path

from smokesense.weather.store import SeriesStore
from smokesense.weather.types import (
    WEATHER_SCHEMA,
    RawWeatherRecord,
    WeatherSeries,
    WeatherStation,
    ensure_utc,
    parse_utc,
)

DEFAULT_BASE_URL = "https://api.synopticdata.com/v2"
TOKEN_ENV_VAR = "SMOKESENSE_API_TOKEN"


class MesonetClient:
    def __init__(
        self,
        mode: str = "replay",
        fixture_dir: Path | str | None = None,
        base_url: str = DEFAULT_BASE_URL,
        token_env: str = TOKEN_ENV_VAR,
    ):
        if mode not in ("replay", "live"):
            raise ValueError(f"mode must be 'replay' or 'live', got '{mode}'")
        self.mode = mode
        self.base_url = base_url
        self.token_env = token_env
        self._store: SeriesStore | None = None
        if mode == "replay":
            if fixture_dir is None:
                raise ValueError("replay mode requires fixture_dir")
            self._store = SeriesStore.from_dir(fixture_dir)

    # -- queries ------------------------------------------------------------

    def stations(self) -> list[WeatherStation]:
        if self.mode == "replay":
            return list(self._store.registry)
        payload = self._get("/stations/metadata", {})
        return [
            WeatherStation(
                station_id=s["STID"],
                latitude=float(s["LATITUDE"]),
                longitude=float(s["LONGITUDE"]),
                network=str(s.get("MNET_ID", "")),
            )
            for s in payload.get("STATION", [])
        ]

    def timeseries(self, station_id: str, start: datetime, end: datetime) -> WeatherSeries:
        """Observations for one station within [start, end]."""
        start, end = ensure_utc(start), ensure_utc(end)
        if self.mode == "replay":
            if station_id not in self._store:
                raise KeyError(f"no fixture for station '{station_id}'")
            full = self._store[station_id]
            records = [r for r in full.records if start <= r.timestamp <= end]
            return WeatherSeries(station_id=station_id, records=records, cadence=full.cadence)
        return self._live_timeseries(station_id, start, end)

    # -- live plumbing ------------------------------------------------------

    def _token(self) -> str:
        token = os.environ.get(self.token_env, "")
        if not token:
            raise RuntimeError(f"live mode requires a token in ${self.token_env}")
        return token

    def _get(self, path: str, params: dict) -> dict:
        import requests

        params = dict(params, token=self._token())
        resp = requests.get(self.base_url + path, params=params, timeout=30)
        resp.raise_for_status()
        return resp.json()

    def _live_timeseries(self, station_id: str, start: datetime, end: datetime) -> WeatherSeries:
        fmt = "%Y%m%d%H%M"
        payload = self._get(
            "/stations/timeseries",
            {"stid": station_id, "start": start.strftime(fmt), "end": end.strftime(fmt), "obtimezone": "utc"},
        )
        stations = payload.get("STATION", [])
        if not stations:
            raise KeyError(f"no data returned for station '{station_id}'")
        obs = stations[0].get("OBSERVATIONS", {})
        times = [parse_utc(t) for t in obs.get("date_time", [])]
        records = []
        for i, t in enumerate(times):
            attrs: dict[str, float | None] = {}
            for name in WEATHER_SCHEMA:
                col = obs.get(f"{name}_set_1")
                attrs[name] = None if col is None or col[i] is None else float(col[i])
            records.append(RawWeatherRecord(station_id=station_id, timestamp=t, attributes=attrs))
        return WeatherSeries(station_id=station_id, records=records)
