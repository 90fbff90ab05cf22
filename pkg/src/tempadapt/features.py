"""Hourly feature engineering: sensor aggregation, weather join, encodings, scaling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, IngestionError
from .solar import solar_position

log = logging.getLogger(__name__)

ROOF_CODES = {"light": 0, "medium": 1, "dark": 2}
WEATHER_VARS = ["air_temp_c", "rel_humidity", "dew_point_c", "surface_pressure_hpa", "total_precip_mm"]
TIME_SUN_COLUMNS = ["hour_sin", "hour_cos", "doy_sin", "doy_cos", "sun_az_sin", "sun_az_cos", "sun_alt_sin"]
DYNAMIC_COLUMNS = WEATHER_VARS + TIME_SUN_COLUMNS + ["indoor_temp_obs"]
CONTEXT_COLUMNS = ["roof_code", "ceiling_board", "area_m2", "occupancy"]
SCALED_COLUMNS = WEATHER_VARS + ["indoor_temp_obs", "area_m2", "occupancy"]
TARGET_COLUMN = "indoor_temp_c"
TARGET_SCALE_COLUMN = "indoor_temp_obs"
SENSOR_BOUNDS = (-10.0, 60.0)
MIN_JOIN_COVERAGE = 0.5


@dataclass(frozen=True)
class BuildingContext:
    building_id: str
    lat: float
    lon: float
    area_m2: float
    occupancy: float
    roof_color: str
    ceiling_board: bool

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise DataError(f"{self.building_id}: coordinates ({self.lat}, {self.lon}) out of range")
        if not self.area_m2 > 0:
            raise DataError(f"{self.building_id}: area must be > 0, got {self.area_m2}")
        if self.occupancy < 0:
            raise DataError(f"{self.building_id}: occupancy must be >= 0, got {self.occupancy}")
        roof_code(self.roof_color)


def roof_code(label: str) -> int:
    try:
        return ROOF_CODES[label]
    except KeyError:
        raise DataError(f"unknown roof colour {label!r}; allowed: {', '.join(ROOF_CODES)}") from None


def contexts_frame(contexts: Iterable[BuildingContext]) -> pd.DataFrame:
    rows = [c.__dict__ for c in contexts]
    return pd.DataFrame(rows, columns=list(BuildingContext.__dataclass_fields__))


# --- aggregation ------------------------------------------------------


def aggregate_hourly(records: pd.DataFrame) -> pd.DataFrame:
    """Collapse sub-hourly readings to the hourly maximum per building.

    Hours without readings are simply absent; they show up as gaps when the
    frame is segmented.
    """
    if records.empty:
        return pd.DataFrame(columns=["timestamp", "building_id", TARGET_COLUMN])
    ts = pd.to_datetime(records["timestamp"], utc=True)
    df = pd.DataFrame(
        {"timestamp": ts.dt.floor("h"), "building_id": records["building_id"].astype(str), TARGET_COLUMN: records[TARGET_COLUMN].astype(float)}
    )
    out = df.groupby(["building_id", "timestamp"], sort=True)[TARGET_COLUMN].max().reset_index()
    return out[["timestamp", "building_id", TARGET_COLUMN]]


# --- encodings --------------------------------------------------------


def encode_cyclical(value, period: float):
    if period <= 0:
        raise ConfigError(f"period must be > 0, got {period}")
    angle = 2.0 * np.pi * np.asarray(value, dtype=np.float64) / period
    s, c = np.sin(angle), np.cos(angle)
    if np.ndim(value) == 0:
        return float(s), float(c)
    return s, c


@dataclass(frozen=True)
class ColumnScaler:
    mean: float
    std: float

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


@dataclass
class Scaler:
    """Per-column standardisation fitted once on source training rows."""

    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return list(self.mean)

    def column(self, name: str) -> ColumnScaler:
        return ColumnScaler(self.mean[name], self.std[name])

    def transform(self, table: pd.DataFrame) -> pd.DataFrame:
        out = table.copy()
        for c in self.columns:
            out[c] = (out[c].astype(float) - self.mean[c]) / self.std[c]
        return out

    def inverse_transform(self, table: pd.DataFrame) -> pd.DataFrame:
        out = table.copy()
        for c in self.columns:
            out[c] = out[c].astype(float) * self.std[c] + self.mean[c]
        return out

    def to_dict(self) -> dict:
        return {"mean": dict(self.mean), "std": dict(self.std)}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(mean={k: float(v) for k, v in d["mean"].items()}, std={k: float(v) for k, v in d["std"].items()})


def fit_scaler(table: pd.DataFrame, columns: Sequence[str] = SCALED_COLUMNS, mask=None) -> Scaler:
    """Fit mean/std (population, like sklearn's StandardScaler) on the rows selected by ``mask``."""
    rows = table if mask is None else table.loc[np.asarray(mask, dtype=bool)]
    if rows.empty:
        raise ConfigError("cannot fit a scaler on zero rows")
    scaler = Scaler()
    for c in columns:
        v = rows[c].to_numpy(dtype=np.float64)
        mu = float(v.mean())
        sd = float(v.std())
        if sd < 1e-12:
            raise ConfigError(f"column {c!r} has zero variance on the fit rows; cannot standardise")
        scaler.mean[c] = mu
        scaler.std[c] = sd
    return scaler


def encode_context(ctx: BuildingContext, scaler: Scaler | None = None) -> np.ndarray:
    """[roof code, ceiling flag, area, occupancy]; area and occupancy scaled when a scaler is given."""
    area, occ = float(ctx.area_m2), float(ctx.occupancy)
    if scaler is not None:
        area = float(scaler.column("area_m2").transform(area))
        occ = float(scaler.column("occupancy").transform(occ))
    return np.array([roof_code(ctx.roof_color), 1.0 if ctx.ceiling_board else 0.0, area, occ])


# --- frame ------------------------------------------------------------


@dataclass
class FeatureFrame:
    """Hourly per-building rows; ``segment`` numbers contiguous hourly runs."""

    table: pd.DataFrame
    scaled: bool = False
    dropped_hours: int = 0

    @property
    def dynamic_columns(self) -> list[str]:
        return list(DYNAMIC_COLUMNS)

    @property
    def context_columns(self) -> list[str]:
        return list(CONTEXT_COLUMNS)

    def __len__(self) -> int:
        return len(self.table)

    def segments(self):
        """Yield ``(building_id, segment_table)`` for each contiguous hourly run."""
        for (bid, _), seg in self.table.groupby(["building_id", "segment"], sort=True):
            yield bid, seg

    def segment_lengths(self) -> list[int]:
        return [len(seg) for _, seg in self.segments()]


def apply_scaler(scaler: Scaler, frame: FeatureFrame) -> FeatureFrame:
    if frame.scaled:
        raise ConfigError("frame is already scaled")
    return FeatureFrame(scaler.transform(frame.table), scaled=True, dropped_hours=frame.dropped_hours)


def _segment_ids(building: pd.Series, ts: pd.Series) -> np.ndarray:
    new_run = (building != building.shift()) | (ts.diff() != pd.Timedelta(hours=1))
    return np.cumsum(new_run.to_numpy()) - 1


def build_frame(sensor_hourly: pd.DataFrame, weather: pd.DataFrame, contexts) -> FeatureFrame:
    """Join hourly indoor temperatures with weather and building context.

    Rows lacking any weather variable are dropped; fewer than half the sensor
    hours surviving the join is treated as an ingestion bug (usually a unit or
    timezone mismatch).
    """
    ctx = contexts if isinstance(contexts, pd.DataFrame) else contexts_frame(contexts)
    ctx = ctx.set_index("building_id")
    sensor = sensor_hourly.copy()
    sensor["timestamp"] = pd.to_datetime(sensor["timestamp"], utc=True)
    sensor["building_id"] = sensor["building_id"].astype(str)
    missing = sorted(set(sensor["building_id"]) - set(ctx.index.astype(str)))
    if missing:
        raise IngestionError(f"no building context for: {', '.join(missing)}")

    w = weather.copy()
    w["timestamp"] = pd.to_datetime(w["timestamp"], utc=True)
    if w["timestamp"].duplicated().any():
        raise IngestionError("weather has duplicate timestamps")
    joined = sensor.merge(w[["timestamp"] + WEATHER_VARS], on="timestamp", how="left")
    complete = joined[WEATHER_VARS].notna().all(axis=1)
    n_sensor = len(sensor)
    dropped = int((~complete).sum())
    if n_sensor and complete.sum() < MIN_JOIN_COVERAGE * n_sensor:
        raise IngestionError(
            f"only {int(complete.sum())}/{n_sensor} sensor hours matched weather rows; check timezones and units"
        )
    if dropped:
        log.info("dropped %d sensor hours with incomplete weather", dropped)
    df = joined.loc[complete].sort_values(["building_id", "timestamp"]).reset_index(drop=True)

    ts = df["timestamp"]
    hour = ts.dt.hour.to_numpy() + ts.dt.minute.to_numpy() / 60.0
    doy = ts.dt.dayofyear.to_numpy() - 1 + hour / 24.0
    df["hour_sin"], df["hour_cos"] = encode_cyclical(hour, 24.0)
    df["doy_sin"], df["doy_cos"] = encode_cyclical(doy, 365.25)

    c = ctx.loc[df["building_id"]]
    az, alt = solar_position(ts.to_numpy(), c["lat"].to_numpy(dtype=float), c["lon"].to_numpy(dtype=float))
    df["sun_az_sin"], df["sun_az_cos"] = encode_cyclical(az, 360.0)
    df["sun_alt_sin"] = np.sin(np.radians(alt))

    df["indoor_temp_obs"] = df[TARGET_COLUMN].astype(float)
    df["roof_code"] = [float(roof_code(r)) for r in c["roof_color"]]
    df["ceiling_board"] = c["ceiling_board"].astype(bool).astype(float).to_numpy()
    df["area_m2"] = c["area_m2"].astype(float).to_numpy()
    df["occupancy"] = c["occupancy"].astype(float).to_numpy()
    df["segment"] = _segment_ids(df["building_id"], df["timestamp"])

    cols = ["building_id", "timestamp", "segment"] + DYNAMIC_COLUMNS + CONTEXT_COLUMNS + [TARGET_COLUMN]
    return FeatureFrame(df[cols], dropped_hours=dropped)
