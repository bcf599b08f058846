from smokesense.weather.types import (
    CORE_ATTRIBUTES,
    VECTOR_COMPONENTS,
    WEATHER_SCHEMA,
    CameraPose,
    RawWeatherRecord,
    WeatherSeries,
    WeatherStation,
    WeatherVector,
)
from smokesense.weather.pipeline import (
    StationSelection,
    WeatherStats,
    aggregate_stations,
    build_weather_vector,
    denormalize_weather,
    filter_attributes,
    interpolate_series,
    normalize_weather,
    random_weather_vector,
    select_stations,
    wind_to_uv,
)
from smokesense.weather.store import SeriesStore
from smokesense.weather.client import MesonetClient

__all__ = [
    "WEATHER_SCHEMA",
    "CORE_ATTRIBUTES",
    "VECTOR_COMPONENTS",
    "WeatherStation",
    "RawWeatherRecord",
    "WeatherSeries",
    "CameraPose",
    "WeatherVector",
    "WeatherStats",
    "StationSelection",
    "filter_attributes",
    "wind_to_uv",
    "interpolate_series",
    "select_stations",
    "aggregate_stations",
    "normalize_weather",
    "denormalize_weather",
    "build_weather_vector",
    "random_weather_vector",
    "SeriesStore",
    "MesonetClient",
]
