from .bundle import DatasetBundle
from .csvio import (
    ReadReport,
    merge_weather,
    read_context_csv,
    read_sensor_csv,
    read_weather_csv,
    write_context_csv,
    write_sensor_csv,
    write_weather_csv,
)
from .synth import DomainData, DomainSpec, SynthConfig, generate_synthetic
from .weather_api import WeatherFetchError, WeatherParseError, fetch_weather_archive, parse_archive_payload

__all__ = [
    "DatasetBundle",
    "DomainData",
    "DomainSpec",
    "ReadReport",
    "SynthConfig",
    "WeatherFetchError",
    "WeatherParseError",
    "fetch_weather_archive",
    "generate_synthetic",
    "merge_weather",
    "parse_archive_payload",
    "read_context_csv",
    "read_sensor_csv",
    "read_weather_csv",
    "write_context_csv",
    "write_sensor_csv",
    "write_weather_csv",
]
