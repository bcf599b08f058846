"""Domain types for station weather data and per-frame weather vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

# Raw station feed schema: 23 attributes, declared order is canonical.
# The first six are the low-missingness attributes the detector consumes.
WEATHER_SCHEMA: tuple[str, ...] = (
    "air_temperature",
    "relative_humidity",
    "wind_speed",
    "wind_gust",
    "wind_direction",
    "dew_point",
    "solar_radiation",
    "pressure",
    "sea_level_pressure",
    "altimeter",
    "precip_accum",
    "precip_rate",
    "soil_temperature",
    "soil_moisture",
    "fuel_moisture",
    "fuel_temperature",
    "visibility",
    "cloud_cover",
    "snow_depth",
    "heat_index",
    "wind_chill",
    "evapotranspiration",
    "uv_index",
)

CORE_ATTRIBUTES: tuple[str, ...] = WEATHER_SCHEMA[:6]

# Fixed component order of the fused per-frame vector.
VECTOR_COMPONENTS: tuple[str, ...] = CORE_ATTRIBUTES + ("u", "v")

WEATHER_VECTOR_DIM = len(VECTOR_COMPONENTS)


def ensure_utc(t: datetime) -> datetime:
    """Require a timezone-aware instant and normalize it to UTC."""
    if t.tzinfo is None:
        raise ValueError(f"naive datetime not allowed: {t!r}")
    return t.astimezone(timezone.utc)


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 instant ('Z' suffix accepted) into a UTC datetime."""
    return ensure_utc(datetime.fromisoformat(text.replace("Z", "+00:00")))


def to_epoch(t: datetime) -> float:
    return ensure_utc(t).timestamp()


@dataclass(frozen=True)
class WeatherStation:
    station_id: str
    latitude: float
    longitude: float
    network: str = ""
    elevation: float | None = None

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"station {self.station_id}: latitude {self.latitude} out of [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"station {self.station_id}: longitude {self.longitude} out of [-180, 180]")


@dataclass(frozen=True)
class RawWeatherRecord:
    """One timestamped observation; missing attributes are None."""

    station_id: str
    timestamp: datetime
    attributes: dict[str, float | None]

    def __post_init__(self):
        object.__setattr__(self, "timestamp", ensure_utc(self.timestamp))
        unknown = set(self.attributes) - set(WEATHER_SCHEMA)
        if unknown:
            raise ValueError(f"attributes not in schema: {sorted(unknown)}")


@dataclass
class WeatherSeries:
    """Ordered observations of one station, nominally every `cadence` seconds."""

    station_id: str
    records: list[RawWeatherRecord]
    cadence: float = 600.0

    def __post_init__(self):
        times = [to_epoch(r.timestamp) for r in self.records]
        for a, b, rec in zip(times, times[1:], self.records[1:]):
            if b <= a:
                raise ValueError(
                    f"station {self.station_id}: timestamps not strictly increasing at {rec.timestamp}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def span(self) -> tuple[datetime, datetime]:
        if not self.records:
            raise ValueError(f"station {self.station_id}: empty series")
        return self.records[0].timestamp, self.records[-1].timestamp

    def covers(self, t: datetime) -> bool:
        if not self.records:
            return False
        lo, hi = self.span
        return lo <= ensure_utc(t) <= hi


@dataclass(frozen=True)
class CameraPose:
    camera_id: str
    latitude: float
    longitude: float
    view_azimuth: float
    field_of_view: float | None = None  # None -> default +/-90 deg half-width

    def __post_init__(self):
        if not 0.0 <= self.view_azimuth < 360.0:
            raise ValueError(f"camera {self.camera_id}: view_azimuth {self.view_azimuth} out of [0, 360)")
        if self.field_of_view is not None and not 0.0 < self.field_of_view <= 360.0:
            raise ValueError(f"camera {self.camera_id}: field_of_view {self.field_of_view} out of (0, 360]")

    @property
    def half_width(self) -> float:
        return 90.0 if self.field_of_view is None else self.field_of_view / 2.0


@dataclass
class WeatherVector:
    """8 components in VECTOR_COMPONENTS order at one frame instant."""

    values: np.ndarray
    timestamp: datetime
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (WEATHER_VECTOR_DIM,):
            raise ValueError(f"weather vector must have shape ({WEATHER_VECTOR_DIM},), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("weather vector contains non-finite values")
        self.timestamp = ensure_utc(self.timestamp)
        if not self.normalized:
            speed = self["wind_speed"]
            uv_mag = math.hypot(self["u"], self["v"])
            if abs(uv_mag - speed) > 1e-9:
                raise ValueError(
                    f"wind u/v magnitude {uv_mag!r} inconsistent with wind_speed {speed!r}"
                )

    def __getitem__(self, component: str) -> float:
        return float(self.values[VECTOR_COMPONENTS.index(component)])

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(VECTOR_COMPONENTS, self.values)}
