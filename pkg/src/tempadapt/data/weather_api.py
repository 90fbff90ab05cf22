"""Client for the Open-Meteo historical archive, with an on-disk JSON cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd
import requests

from ..errors import IngestionError
from ..features import WEATHER_VARS

log = logging.getLogger(__name__)

ARCHIVE_URL = "https://archive-api.open-meteo.com/v1/archive"
HOURLY_VARS = ("temperature_2m", "relative_humidity_2m", "dew_point_2m")
# API variable -> weather column
VAR_COLUMNS = {
    "temperature_2m": "air_temp_c",
    "relative_humidity_2m": "rel_humidity",
    "dew_point_2m": "dew_point_c",
    "surface_pressure": "surface_pressure_hpa",
    "precipitation": "total_precip_mm",
}
CACHE_ENV = "TEMPADAPT_CACHE_DIR"


class WeatherFetchError(IngestionError):
    """The archive could not be reached and nothing was cached. Safe to retry later."""

    retryable = True


class WeatherParseError(IngestionError):
    """The archive answered with a payload that does not match the expected schema."""


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "tempadapt" / "weather"


def cache_path(cache_dir, lat: float, lon: float, start: str, end: str, variables=HOURLY_VARS) -> Path:
    name = f"{float(lat)!r}_{float(lon)!r}_{start}_{end}"
    if tuple(variables) != HOURLY_VARS:
        name += "_" + hashlib.sha1(",".join(variables).encode()).hexdigest()[:10]
    return Path(cache_dir) / f"{name}.json"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_archive_payload(payload: dict, variables=HOURLY_VARS) -> pd.DataFrame:
    """Turn an archive JSON response into hourly weather rows (UTC)."""
    if not isinstance(payload, dict):
        raise WeatherParseError(f"payload: expected an object, got {type(payload).__name__}")
    hourly = payload.get("hourly")
    if not isinstance(hourly, dict):
        raise WeatherParseError("payload.hourly: missing or not an object")
    times = hourly.get("time")
    if not isinstance(times, list):
        raise WeatherParseError("payload.hourly.time: missing or not a list")
    offset = payload.get("utc_offset_seconds", 0)
    if offset not in (0, None):
        raise WeatherParseError(f"payload.utc_offset_seconds: expected 0 (UTC request), got {offset}")
    try:
        ts = pd.to_datetime(pd.Series(times), utc=True, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise WeatherParseError(f"payload.hourly.time: {exc}") from None
    out = pd.DataFrame({"timestamp": ts})
    for var in variables:
        values = hourly.get(var)
        if not isinstance(values, list) or len(values) != len(times):
            raise WeatherParseError(f"payload.hourly.{var}: missing or length != len(time)")
        out[VAR_COLUMNS.get(var, var)] = np.array([np.nan if v is None else float(v) for v in values])
    for col in WEATHER_VARS:
        if col not in out:
            out[col] = np.nan
    return out[["timestamp"] + WEATHER_VARS]


def fetch_weather_archive(
    lat: float,
    lon: float,
    start_date: str | date,
    end_date: str | date,
    cache_dir=None,
    variables=HOURLY_VARS,
    session: requests.Session | None = None,
    attempts: int = 3,
    backoff: float = 1.0,
    timeout: float = 30.0,
    sleep=time.sleep,
) -> pd.DataFrame:
    """Hourly weather for ``[start_date, end_date]`` (inclusive, UTC).

    A cached response is used without touching the network. Otherwise the
    request is tried ``attempts`` times with exponential backoff on
    connection errors and 5xx responses.
    """
    start, end = str(start_date), str(end_date)
    path = cache_path(cache_dir or default_cache_dir(), lat, lon, start, end, variables)
    if path.exists():
        log.debug("weather cache hit %s", path)
        return parse_archive_payload(json.loads(path.read_text()), variables)

    params = {
        "latitude": lat,
        "longitude": lon,
        "start_date": start,
        "end_date": end,
        "hourly": ",".join(variables),
        "timezone": "GMT",
    }
    http = session or requests.Session()
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            resp = http.get(ARCHIVE_URL, params=params, timeout=timeout)
            if resp.status_code >= 500:
                raise requests.HTTPError(f"HTTP {resp.status_code}", response=resp)
            if resp.status_code >= 400:
                raise WeatherFetchError(f"archive rejected request ({resp.status_code}): {resp.text[:200]}")
            payload = resp.json()
            break
        except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as exc:
            last = exc
            log.warning("weather fetch attempt %d/%d failed: %s", attempt + 1, attempts, exc)
            if attempt + 1 < attempts:
                sleep(backoff * 2**attempt)
    else:
        raise WeatherFetchError(f"archive unreachable after {attempts} attempts: {last}")

    frame = parse_archive_payload(payload, variables)
    _write_atomic(path, json.dumps(payload))
    return frame
