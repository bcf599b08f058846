"""Weather feature pipeline: filtering, wind decomposition, interpolation,
station selection, aggregation, and normalization into per-frame vectors."""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from smokesense.geo import angular_difference_deg, haversine_km, initial_bearing_deg
from smokesense.weather.types import (
    CORE_ATTRIBUTES,
    VECTOR_COMPONENTS,
    WEATHER_SCHEMA,
    WEATHER_VECTOR_DIM,
    CameraPose,
    WeatherSeries,
    WeatherStation,
    WeatherVector,
    ensure_utc,
)


def filter_attributes(
    series: WeatherSeries,
    window: tuple[datetime, datetime],
    max_missing_fraction: float,
) -> list[str]:
    """Attributes whose missing fraction over `window` is strictly below the
    threshold, in schema order."""
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ValueError(f"max_missing_fraction {max_missing_fraction} out of [0, 1]")
    lo, hi = ensure_utc(window[0]), ensure_utc(window[1])
    if hi < lo:
        raise ValueError("empty window: end precedes start")
    in_window = [r for r in series.records if lo <= r.timestamp <= hi]
    if not in_window:
        raise ValueError(f"no records in window [{lo.isoformat()}, {hi.isoformat()}]")

    names: list[str] = []
    seen: set[str] = set()
    for rec in in_window:
        seen.update(rec.attributes)
    n = len(in_window)
    for name in WEATHER_SCHEMA:
        if name not in seen:
            continue
        missing = sum(1 for r in in_window if r.attributes.get(name) is None)
        if missing / n < max_missing_fraction:
            names.append(name)
    return names


def wind_to_uv(speed: float, direction: float) -> tuple[float, float]:
    """Cartesian wind components from speed and meteorological from-direction.

    u = -speed*sin(dir), v = -speed*cos(dir); magnitude is preserved.
    """
    if math.isnan(speed) or math.isnan(direction):
        raise ValueError("wind speed/direction must not be NaN")
    if speed < 0:
        raise ValueError(f"wind speed must be non-negative, got {speed}")
    theta = math.radians(direction)
    return -speed * math.sin(theta), -speed * math.cos(theta)


def interpolate_series(
    series: WeatherSeries,
    t: datetime,
    attributes: Sequence[str] = CORE_ATTRIBUTES,
) -> dict[str, float]:
    """Linear interpolation of the requested attributes at instant `t`.

    Exact at record timestamps. `t` outside the series span or a missing
    value at a bracketing record is an error, never an extrapolation.
    """
    if not series.records:
        raise ValueError(f"station {series.station_id}: empty series")
    tq = ensure_utc(t)
    times = [r.timestamp for r in series.records]
    if tq < times[0] or tq > times[-1]:
        raise ValueError(
            f"extrapolation not supported: {tq.isoformat()} outside series span "
            f"[{times[0].isoformat()}, {times[-1].isoformat()}]"
        )

    idx = bisect_left(times, tq)
    if times[idx] == tq:
        lo = hi = series.records[idx]
        frac = 0.0
    else:
        # timedelta ratio avoids the precision loss of absolute epoch floats
        lo, hi = series.records[idx - 1], series.records[idx]
        frac = (tq - times[idx - 1]) / (times[idx] - times[idx - 1])

    out: dict[str, float] = {}
    for name in attributes:
        v0 = lo.attributes.get(name)
        v1 = hi.attributes.get(name)
        if v0 is None or v1 is None:
            raise ValueError(
                f"station {series.station_id}: missing '{name}' at bracketing record(s) "
                f"{lo.timestamp.isoformat()} / {hi.timestamp.isoformat()}"
            )
        out[name] = v0 + frac * (v1 - v0)
    return out


@dataclass(frozen=True)
class StationSelection:
    station_ids: tuple[str, ...]
    fallback: bool  # True when the view sector held fewer than k stations


def select_stations(
    camera: CameraPose,
    registry: Sequence[WeatherStation],
    k: int = 3,
) -> StationSelection:
    """The k nearest stations whose bearing lies in the camera's view sector.

    Falls back to nearest-overall fill (flagged) when the sector holds fewer
    than k stations. Distance ties break on station_id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not registry:
        raise ValueError("empty station registry")

    ranked = []
    for st in registry:
        d = haversine_km(camera.latitude, camera.longitude, st.latitude, st.longitude)
        bearing = initial_bearing_deg(camera.latitude, camera.longitude, st.latitude, st.longitude)
        in_sector = angular_difference_deg(bearing, camera.view_azimuth) <= camera.half_width
        ranked.append((d, st.station_id, in_sector))
    ranked.sort(key=lambda r: (r[0], r[1]))

    chosen = [sid for d, sid, ok in ranked if ok][:k]
    fallback = len(chosen) < k
    if fallback:
        for d, sid, ok in ranked:
            if sid not in chosen:
                chosen.append(sid)
            if len(chosen) == k:
                break
    return StationSelection(tuple(chosen[:k]), fallback)


def aggregate_stations(values: Sequence[Mapping[str, float]]) -> dict[str, float]:
    """Element-wise mean across stations; wind_direction uses a circular
    mean, and u/v (when present) are recomputed from the aggregated
    speed/direction."""
    if not values:
        raise ValueError("no station values to aggregate")
    keys = set(values[0])
    for v in values[1:]:
        if set(v) != keys:
            raise ValueError(f"inconsistent attribute sets: {sorted(keys)} vs {sorted(v)}")

    out: dict[str, float] = {}
    for name in values[0]:
        xs = [float(v[name]) for v in values]
        if name == "wind_direction":
            out[name] = _circular_mean_deg(xs)
        else:
            out[name] = float(np.mean(xs))
    if "u" in keys or "v" in keys:
        if "wind_speed" not in keys or "wind_direction" not in keys:
            raise ValueError("u/v aggregation requires wind_speed and wind_direction")
        out["u"], out["v"] = wind_to_uv(out["wind_speed"], out["wind_direction"])
    return out


def _circular_mean_deg(directions: Iterable[float]) -> float:
    ang = np.radians(list(directions))
    s, c = np.mean(np.sin(ang)), np.mean(np.cos(ang))
    if math.hypot(s, c) < 1e-12:
        return 0.0
    deg = math.degrees(math.atan2(s, c)) % 360.0
    # % can round a tiny negative angle up to exactly 360.0
    return 0.0 if deg == 360.0 else deg


@dataclass
class WeatherStats:
    """Per-component mean/SD fit on training-split vectors only."""

    mean: np.ndarray
    sd: np.ndarray
    components: tuple[str, ...] = VECTOR_COMPONENTS

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.sd = np.asarray(self.sd, dtype=np.float64)
        n = len(self.components)
        if self.mean.shape != (n,) or self.sd.shape != (n,):
            raise ValueError(f"stats must cover all {n} components")
        if np.any(self.sd < 0):
            raise ValueError("negative SD in weather stats")

    @classmethod
    def fit(cls, vectors: Sequence[WeatherVector]) -> "WeatherStats":
        if not vectors:
            raise ValueError("cannot fit stats on empty vector list")
        if any(v.normalized for v in vectors):
            raise ValueError("stats must be fit on unnormalized vectors")
        data = np.stack([v.values for v in vectors])
        return cls(mean=data.mean(axis=0), sd=data.std(axis=0))

    def to_dict(self) -> dict:
        return {
            "components": list(self.components),
            "mean": [float(x) for x in self.mean],
            "sd": [float(x) for x in self.sd],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WeatherStats":
        return cls(
            mean=np.array(d["mean"], dtype=np.float64),
            sd=np.array(d["sd"], dtype=np.float64),
            components=tuple(d["components"]),
        )


def normalize_weather(vector: WeatherVector, stats: WeatherStats) -> WeatherVector:
    """Z-score each component with training-split stats; zero-SD components map to 0."""
    for name in VECTOR_COMPONENTS:
        if name not in stats.components:
            raise ValueError(f"stats missing component '{name}'")
    order = [stats.components.index(name) for name in VECTOR_COMPONENTS]
    mean, sd = stats.mean[order], stats.sd[order]
    z = np.where(sd > 0, (vector.values - mean) / np.where(sd > 0, sd, 1.0), 0.0)
    return WeatherVector(values=z, timestamp=vector.timestamp, normalized=True)


def denormalize_weather(vector: WeatherVector, stats: WeatherStats) -> WeatherVector:
    """Inverse of normalize_weather (zero-SD components recover the mean)."""
    if not vector.normalized:
        raise ValueError("expected a normalized vector")
    order = [stats.components.index(name) for name in VECTOR_COMPONENTS]
    mean, sd = stats.mean[order], stats.sd[order]
    return WeatherVector(values=vector.values * sd + mean, timestamp=vector.timestamp, normalized=False)


def build_weather_vector(
    camera: CameraPose,
    registry: Sequence[WeatherStation],
    store: Mapping[str, WeatherSeries],
    t: datetime,
    stats: WeatherStats | None = None,
    k: int = 3,
) -> WeatherVector:
    """Fused per-frame weather vector at instant `t`.

    Composition: select k in-view stations -> interpolate the six core
    attributes per station -> aggregate -> derive u/v -> z-normalize (when
    stats are supplied; pass None while fitting the stats themselves).
    """
    selection = select_stations(camera, registry, k=k)
    per_station = []
    for sid in selection.station_ids:
        if sid not in store:
            raise KeyError(f"camera {camera.camera_id}: no series for selected station '{sid}'")
        try:
            per_station.append(interpolate_series(store[sid], t, CORE_ATTRIBUTES))
        except ValueError as e:
            raise ValueError(f"camera {camera.camera_id}, station {sid}, t={ensure_utc(t).isoformat()}: {e}") from e
    agg = aggregate_stations(per_station)
    u, v = wind_to_uv(agg["wind_speed"], agg["wind_direction"])
    values = np.array([agg[name] for name in CORE_ATTRIBUTES] + [u, v], dtype=np.float64)
    vec = WeatherVector(values=values, timestamp=t, normalized=False)
    if stats is None:
        return vec
    return normalize_weather(vec, stats)


def random_weather_vector(seed, t: datetime) -> WeatherVector:
    """Standard-normal stand-in vector (the random-weather control arm)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return WeatherVector(values=rng.standard_normal(WEATHER_VECTOR_DIM), timestamp=t, normalized=True)
