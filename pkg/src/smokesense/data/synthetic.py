"""Procedural desk-scale fire corpora: frames, masks, weather fixtures.

Each fire gets a smooth terrain backdrop and, from offset 0 onward, a
drifting Gaussian smoke plume that grows in size and opacity; the mask
marks where the plume envelope is substantial. Station fixtures are
written in the same external formats the real pipeline reads.

Two couplings:
  none            bright plumes, weather uncorrelated with the labels.
  discriminative  faint plumes plus smoke-like haze on pre-ignition
                  frames (image evidence ambiguous), while station air
                  temperature steps up right after ignition (weather
                  carries the label). Station records are phased so the
                  step's interpolation window never touches a
                  pre-ignition frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from PIL import Image

from smokesense.data.manifest import (
    MANIFEST_FILENAME,
    ManifestEntry,
    apply_split,
    make_splits,
    write_manifest,
)
from smokesense.data.sequences import ALL_OFFSETS, frame_filename, mask_filename
from smokesense.imaging.tiling import TileGeometry
from smokesense.weather.store import REGISTRY_FILENAME, write_station_fixture, write_station_registry
from smokesense.weather.types import RawWeatherRecord, WeatherSeries, WeatherStation

COUPLINGS = ("none", "discriminative")
SMOKE_COLOR = np.array([203.0, 203.0, 208.0])
WEATHER_DIRNAME = "weather"

# station records every 10 min, phased 1 min before the frame grid so the
# knot pair straddling ignition is (-1 min, +9 min): every pre-ignition
# frame interpolates between pre-ignition knots only
KNOT_MINUTES = tuple(range(-61, 50, 10))


@dataclass(frozen=True)
class SyntheticSpec:
    n_fires: int = 20
    image_h: int = 60
    image_w: int = 88
    tile: int = 32
    stride: int = 28
    coupling: str = "none"
    seed: int = 0
    jpeg_quality: int = 92
    stations_per_fire: int = 3

    def __post_init__(self):
        if self.n_fires <= 0:
            raise ValueError(f"n_fires must be positive, got {self.n_fires}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if self.stations_per_fire <= 0:
            raise ValueError("stations_per_fire must be positive")
        if not 1 <= self.jpeg_quality <= 100:
            raise ValueError(f"jpeg_quality must be in [1, 100], got {self.jpeg_quality}")
        self.geometry  # image dims must tile exactly

    @property
    def geometry(self) -> TileGeometry:
        return TileGeometry(
            image_h=self.image_h, image_w=self.image_w, tile=self.tile, stride=self.stride
        )


def _fire_rng(spec: SyntheticSpec, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, stream, index])


def _smooth_field(rng: np.random.Generator, h: int, w: int, n_waves: int = 3) -> np.ndarray:
    """Random low-frequency field scaled to [0, 1]."""
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    f = np.zeros((h, w))
    for _ in range(n_waves):
        fy, fx = rng.uniform(0.5, 2.0, size=2)
        py, px = rng.uniform(0.0, 2.0 * np.pi, size=2)
        f += rng.uniform(0.5, 1.0) * np.cos(2 * np.pi * fy * y / h + py) * np.cos(
            2 * np.pi * fx * x / w + px
        )
    f -= f.min()
    return f / max(f.max(), 1e-9)


def _gaussian_blob(h: int, w: int, cy: float, cx: float, sigma: float) -> np.ndarray:
    y, x = np.ogrid[0:h, 0:w]
    return np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2.0 * sigma**2))


def _blend_smoke(pixels: np.ndarray, envelope: np.ndarray, amplitude: float) -> None:
    pixels += amplitude * envelope[..., None] * (SMOKE_COLOR - pixels)


def _render_frames(spec: SyntheticSpec, index: int) -> tuple[np.ndarray, np.ndarray]:
    """All 80 frames (uint8) and masks (bool) of one fire."""
    rng = _fire_rng(spec, 11, index)
    h, w = spec.image_h, spec.image_w
    discriminative = spec.coupling == "discriminative"

    tint = np.array(
        [
            70.0 + 50.0 * _smooth_field(rng, h, w),
            85.0 + 60.0 * _smooth_field(rng, h, w),
            55.0 + 40.0 * _smooth_field(rng, h, w),
        ]
    ).transpose(1, 2, 0)

    r0 = rng.uniform(0.15 * h, 0.45 * h)
    c0 = rng.uniform(0.15 * w, 0.85 * w)
    drift_angle = rng.uniform(0.0, 2.0 * np.pi)
    drift_speed = rng.uniform(0.15, 0.35)  # px per minute
    dy, dx = drift_speed * math.sin(drift_angle), drift_speed * math.cos(drift_angle)
    sigma0 = rng.uniform(1.2, 1.8)
    sigma_growth = rng.uniform(0.18, 0.30)
    if discriminative:
        # the plume starts below the haze band (invisible to an image-only
        # model) and outgrows it within ~10 minutes, so pixel evidence alone
        # supports late detection while the weather channel leads by minutes
        amp0 = rng.uniform(0.04, 0.07)
        amp_slope, amp_cap = 0.02, 0.45
        illum_sd, noise_sd = 5.0, 6.0
    else:
        amp0 = rng.uniform(0.45, 0.55)
        amp_slope, amp_cap = 0.012, 0.92
        illum_sd, noise_sd = 2.0, 2.0

    hazes = []
    if discriminative:
        # pre-ignition haze patches sit in the same amplitude band as a young
        # plume: an image-only model pays for them with false alarms, while a
        # weather-aware model can veto them against a calm pre-fire signal
        for _ in range(int(rng.integers(4, 6))):
            hazes.append(
                dict(
                    center_offset=rng.uniform(-36.0, -10.0),
                    duration=rng.uniform(8.0, 12.0),
                    cy=rng.uniform(0.1 * h, 0.9 * h),
                    cx=rng.uniform(0.1 * w, 0.9 * w),
                    sigma=rng.uniform(2.0, 5.0),
                    amp=rng.uniform(0.12, 0.30),
                )
            )

    frames = np.empty((len(ALL_OFFSETS), h, w, 3), dtype=np.uint8)
    masks = np.zeros((len(ALL_OFFSETS), h, w), dtype=bool)
    for i, offset in enumerate(ALL_OFFSETS):
        px = tint.copy()
        for haze in hazes:
            envelope_t = math.exp(
                -((offset - haze["center_offset"]) ** 2) / (2.0 * (haze["duration"] / 4.0) ** 2)
            )
            if envelope_t > 1e-3:
                blob = _gaussian_blob(h, w, haze["cy"], haze["cx"], haze["sigma"])
                _blend_smoke(px, blob, haze["amp"] * envelope_t)
        if offset >= 0:
            age = offset + 1
            sigma = min(sigma0 + sigma_growth * age, 9.0)
            cy = float(np.clip(r0 + dy * age, 3.0, h - 4.0))
            cx = float(np.clip(c0 + dx * age, 3.0, w - 4.0))
            core = _gaussian_blob(h, w, cy, cx, sigma)
            trail = _gaussian_blob(
                h, w, cy - dy * age * 0.5, cx - dx * age * 0.5, sigma * 0.75
            )
            envelope = np.maximum(core, 0.55 * trail)
            amp = min(amp0 + amp_slope * age, amp_cap)
            _blend_smoke(px, envelope, amp)
            masks[i] = envelope >= 0.25
        px += rng.normal(0.0, illum_sd) + rng.normal(0.0, noise_sd, size=px.shape)
        frames[i] = np.clip(np.round(px), 0, 255).astype(np.uint8)
    return frames, masks


def _station_position(lat: float, lon: float, bearing_deg: float, dist_km: float):
    b = math.radians(bearing_deg)
    dlat = (dist_km / 111.32) * math.cos(b)
    dlon = (dist_km / (111.32 * math.cos(math.radians(lat)))) * math.sin(b)
    return lat + dlat, lon + dlon


def _make_weather(
    spec: SyntheticSpec, index: int, entry: ManifestEntry
) -> tuple[list[WeatherStation], list[WeatherSeries]]:
    rng = _fire_rng(spec, 13, index)
    discriminative = spec.coupling == "discriminative"

    base_temp = rng.uniform(20.0, 22.0)
    delta_temp = rng.uniform(11.0, 14.0) if discriminative else 0.0
    base_rh = rng.uniform(28.0, 55.0)
    delta_rh = rng.uniform(-24.0, -16.0) if discriminative else 0.0
    base_wind = rng.uniform(2.0, 5.0)
    base_dir = rng.uniform(0.0, 360.0)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=3)

    stations, series_list = [], []
    for j in range(spec.stations_per_fire):
        bearing = (entry.view_azimuth + rng.uniform(-55.0, 55.0)) % 360.0
        dist = rng.uniform(2.0, 8.0)
        slat, slon = _station_position(entry.latitude, entry.longitude, bearing, dist)
        station = WeatherStation(
            station_id=f"ST{index:03d}{chr(ord('A') + j)}",
            latitude=slat,
            longitude=slon,
            network="SYNTH",
        )
        offsets = rng.normal(0.0, 0.2, size=4)  # station-specific biases
        records = []
        for minutes in KNOT_MINUTES:
            t = entry.ignition + timedelta(minutes=minutes)
            step = 1.0 if minutes >= 9 else 0.0
            temp = (
                base_temp
                + offsets[0]
                + 1.0 * math.sin(2.0 * np.pi * minutes / 157.0 + phase[0])
                + step * delta_temp
                + rng.normal(0.0, 0.25)
            )
            rh = float(
                np.clip(
                    base_rh
                    + offsets[1]
                    + 2.0 * math.sin(2.0 * np.pi * minutes / 131.0 + phase[1])
                    + step * delta_rh
                    + rng.normal(0.0, 0.8),
                    3.0,
                    100.0,
                )
            )
            wind = max(
                0.3,
                base_wind
                + offsets[2]
                + 0.5 * math.sin(2.0 * np.pi * minutes / 113.0 + phase[2])
                + rng.normal(0.0, 0.3),
            )
            gust = wind * rng.uniform(1.2, 1.5)
            direction = (base_dir + offsets[3] * 10.0 + rng.normal(0.0, 3.0)) % 360.0
            dew = temp - rng.uniform(7.0, 9.0)
            records.append(
                RawWeatherRecord(
                    station_id=station.station_id,
                    timestamp=t,
                    attributes={
                        "air_temperature": temp,
                        "relative_humidity": rh,
                        "wind_speed": wind,
                        "wind_gust": gust,
                        "wind_direction": direction,
                        "dew_point": dew,
                    },
                )
            )
        stations.append(station)
        series_list.append(WeatherSeries(station_id=station.station_id, records=records))
    return stations, series_list


def _make_entry(spec: SyntheticSpec, index: int) -> ManifestEntry:
    rng = _fire_rng(spec, 7, index)
    return ManifestEntry(
        fire_id=f"fire_{index:04d}",
        camera_id=f"cam{index:02d}",
        ignition=datetime(2020, 6, 1, 10, 0, tzinfo=timezone.utc)
        + timedelta(hours=7 * index, minutes=int(rng.integers(0, 60))),
        latitude=34.0 + 0.7 * (index // 8),
        longitude=-118.0 + 0.7 * (index % 8),
        view_azimuth=float(rng.uniform(0.0, 360.0)),
    )


def generate_synthetic_dataset(spec: SyntheticSpec, root: Path | str) -> list[ManifestEntry]:
    """Write a complete corpus under `root` and return its manifest entries.

    Layout: manifest.csv, one directory of frames+masks per fire, and a
    weather/ directory with the station registry and per-station fixtures.
    Byte-identical for identical (spec, root contents absent) inputs.
    """
    root = Path(root)
    weather_dir = root / WEATHER_DIRNAME
    weather_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    all_stations: list[WeatherStation] = []
    for index in range(spec.n_fires):
        entry = _make_entry(spec, index)
        frames, masks = _render_frames(spec, index)
        fire_dir = root / entry.fire_id
        fire_dir.mkdir(exist_ok=True)
        for i, offset in enumerate(ALL_OFFSETS):
            Image.fromarray(frames[i], "RGB").save(
                fire_dir / frame_filename(entry.camera_id, offset),
                quality=spec.jpeg_quality,
            )
            Image.fromarray(masks[i].astype(np.uint8) * 255, "L").save(
                fire_dir / mask_filename(entry.camera_id, offset)
            )
        stations, series_list = _make_weather(spec, index, entry)
        all_stations.extend(stations)
        for series in series_list:
            write_station_fixture(weather_dir / f"{series.station_id}.csv", series)
        entries.append(entry)

    write_station_registry(weather_dir / REGISTRY_FILENAME, all_stations)
    entries = apply_split(entries, make_splits(entries, seed=spec.seed))
    write_manifest(root / MANIFEST_FILENAME, entries)
    return entries
