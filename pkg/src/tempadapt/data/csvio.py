"""Readers and writers for the sensor, weather and building-context CSV files.

Headers are fixed::

    timestamp,building_id,indoor_temp_c
    timestamp,air_temp_c,rel_humidity,dew_point_c,surface_pressure_hpa,total_precip_mm
    building_id,lat,lon,area_m2,occupancy,roof_color,ceiling_board

Timestamps are RFC 3339 with an explicit offset and are normalised to UTC.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataError, IngestionError
from ..features import SENSOR_BOUNDS, WEATHER_VARS, BuildingContext

log = logging.getLogger(__name__)

SENSOR_HEADER = ["timestamp", "building_id", "indoor_temp_c"]
WEATHER_HEADER = ["timestamp"] + WEATHER_VARS
CONTEXT_HEADER = ["building_id", "lat", "lon", "area_m2", "occupancy", "roof_color", "ceiling_board"]
MAX_BAD_FRACTION = 0.05

WEATHER_BOUNDS = {
    "air_temp_c": (-60.0, 60.0),
    "rel_humidity": (0.0, 100.0),
    "dew_point_c": (-80.0, 40.0),
    "surface_pressure_hpa": (300.0, 1100.0),
    "total_precip_mm": (0.0, 500.0),
}

_OFFSET_RE = r"(?:[Zz]|[+-]\d{2}:\d{2})$"


@dataclass
class ReadReport:
    path: str
    n_rows: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    conflicts: int = 0

    @property
    def n_bad(self) -> int:
        return len({line for line, _ in self.errors})


def _read_raw(path, header: list[str]) -> pd.DataFrame:
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise IngestionError(f"{path}: empty file") from None
    missing = [c for c in header if c not in raw.columns]
    if missing:
        raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}; expected header {','.join(header)}")
    raw = raw[header].copy()
    raw["_line"] = np.arange(len(raw)) + 2  # 1-based, after the header
    return raw


def _parse_timestamps(raw: pd.DataFrame, report: ReadReport) -> pd.Series:
    s = raw["timestamp"].str.strip()
    has_offset = s.str.contains(_OFFSET_RE, regex=True)
    ts = pd.to_datetime(s.where(has_offset), utc=True, errors="coerce", format="ISO8601")
    for line, text in zip(raw["_line"][ts.isna()], s[ts.isna()]):
        report.errors.append((int(line), f"unparseable or offset-less timestamp {text!r}"))
    return ts


def _to_float(text: str) -> float:
    # float() is correctly rounded, so written values read back bit-for-bit
    try:
        return float(text)
    except ValueError:
        return np.nan


def _numeric(raw: pd.DataFrame, col: str, bounds, report: ReadReport, allow_empty: bool = False) -> pd.Series:
    text = raw[col].str.strip()
    empty = text == ""
    vals = pd.Series([_to_float(t) for t in text.where(~empty, "nan")], index=raw.index, dtype=np.float64)
    bad_parse = vals.isna() & ~empty
    lo, hi = bounds
    out_of_range = vals.notna() & ((vals < lo) | (vals > hi))
    for line, t in zip(raw["_line"][bad_parse], text[bad_parse]):
        report.errors.append((int(line), f"{col}: not a number {t!r}"))
    for line, v in zip(raw["_line"][out_of_range], vals[out_of_range]):
        report.errors.append((int(line), f"{col}: {v} outside [{lo}, {hi}]"))
    if not allow_empty:
        for line in raw["_line"][empty]:
            report.errors.append((int(line), f"{col}: empty"))
    return vals.where(~out_of_range)


def _finish(raw: pd.DataFrame, report: ReadReport, path) -> np.ndarray:
    report.n_rows = len(raw)
    bad_lines = {line for line, _ in report.errors}
    if report.n_rows and len(bad_lines) > MAX_BAD_FRACTION * report.n_rows:
        first = "; ".join(f"line {l}: {m}" for l, m in report.errors[:5])
        raise IngestionError(f"{path}: {len(bad_lines)}/{report.n_rows} malformed rows (limit 5%): {first}")
    for line, msg in report.errors:
        log.warning("%s line %d: %s", path, line, msg)
    return ~raw["_line"].isin(bad_lines).to_numpy()


def read_sensor_csv(path) -> tuple[pd.DataFrame, ReadReport]:
    """Parse sensor readings; returns rows sorted by (building, time) and a report of rejected lines."""
    report = ReadReport(str(path))
    raw = _read_raw(path, SENSOR_HEADER)
    ts = _parse_timestamps(raw, report)
    temp = _numeric(raw, "indoor_temp_c", SENSOR_BOUNDS, report)
    bid = raw["building_id"].str.strip()
    for line in raw["_line"][bid == ""]:
        report.errors.append((int(line), "building_id: empty"))
    keep = _finish(raw, report, path)
    df = pd.DataFrame({"timestamp": ts, "building_id": bid, "indoor_temp_c": temp.astype(float)})[keep]
    key = df["building_id"] + df["timestamp"].astype("int64").astype(str).str.zfill(20)
    if not key.is_monotonic_increasing:
        report.warnings.append("rows were not sorted by building and time; sorted on read")
        log.warning("%s: rows out of order, sorting", path)
    df = df.sort_values(["building_id", "timestamp"], kind="stable")
    dup = df.duplicated(["building_id", "timestamp"])
    if dup.any():
        report.warnings.append(f"{int(dup.sum())} duplicate (building, timestamp) readings dropped")
        df = df[~dup]
    return df.reset_index(drop=True), report


def merge_weather(primary: pd.DataFrame, secondary: pd.DataFrame | None) -> tuple[pd.DataFrame, int]:
    """Fill gaps in ``primary`` from ``secondary``; ``primary`` wins where both have a value.

    Returns the merged table and the number of (hour, variable) cells where
    the two sources disagreed.
    """
    if secondary is None or secondary.empty:
        return primary.copy(), 0
    a = primary.set_index("timestamp")[WEATHER_VARS]
    b = secondary.set_index("timestamp").reindex(columns=WEATHER_VARS)
    idx = a.index.union(b.index)
    a, b = a.reindex(idx), b.reindex(idx)
    both = a.notna() & b.notna()
    conflicts = int((both & ~np.isclose(a.fillna(0), b.fillna(0), rtol=0, atol=1e-9)).to_numpy().sum())
    merged = a.combine_first(b).reset_index().rename(columns={"index": "timestamp"})
    return merged[["timestamp"] + WEATHER_VARS], conflicts


def read_weather_csv(path, api: pd.DataFrame | None = None) -> tuple[pd.DataFrame, ReadReport]:
    """Parse an hourly weather CSV; empty cells mean "not provided" and may be filled from ``api``."""
    report = ReadReport(str(path))
    raw = _read_raw(path, WEATHER_HEADER)
    ts = _parse_timestamps(raw, report)
    off_hour = ts.notna() & (ts != ts.dt.floor("h"))
    for line in raw["_line"][off_hour]:
        report.errors.append((int(line), "timestamp not on the hour"))
    dup = ts.notna() & ts.duplicated()
    for line in raw["_line"][dup]:
        report.errors.append((int(line), "duplicate hour"))
    cols = {v: _numeric(raw, v, WEATHER_BOUNDS[v], report, allow_empty=True) for v in WEATHER_VARS}
    keep = _finish(raw, report, path)
    df = pd.DataFrame({"timestamp": ts, **cols})[keep].sort_values("timestamp").reset_index(drop=True)
    df, report.conflicts = merge_weather(df, api)
    if report.conflicts:
        report.warnings.append(f"{report.conflicts} weather values conflicted with the API; CSV kept")
    return df, report


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n"):
        return False
    raise DataError(f"not a boolean: {text!r}")


def read_context_csv(path) -> list[BuildingContext]:
    raw = _read_raw(path, CONTEXT_HEADER)
    out = []
    for row in raw.to_dict("records"):
        try:
            out.append(
                BuildingContext(
                    building_id=row["building_id"].strip(),
                    lat=float(row["lat"]),
                    lon=float(row["lon"]),
                    area_m2=float(row["area_m2"]),
                    occupancy=float(row["occupancy"]),
                    roof_color=row["roof_color"].strip(),
                    ceiling_board=_parse_bool(row["ceiling_board"]),
                )
            )
        except (DataError, ValueError) as exc:
            raise IngestionError(f"{path} line {row['_line']}: {exc}") from None
    ids = [c.building_id for c in out]
    if len(set(ids)) != len(ids):
        raise IngestionError(f"{path}: duplicate building ids")
    return out


def _fmt_ts(ts: pd.Series) -> pd.Series:
    return pd.to_datetime(ts, utc=True).dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _fmt_float(v) -> str:
    return "" if pd.isna(v) else repr(float(v))


def write_sensor_csv(path, df: pd.DataFrame) -> None:
    out = pd.DataFrame(
        {
            "timestamp": _fmt_ts(df["timestamp"]),
            "building_id": df["building_id"].astype(str),
            "indoor_temp_c": [_fmt_float(v) for v in df["indoor_temp_c"]],
        }
    )
    _atomic_csv(path, out)


def write_weather_csv(path, df: pd.DataFrame) -> None:
    out = pd.DataFrame({"timestamp": _fmt_ts(df["timestamp"])})
    for v in WEATHER_VARS:
        out[v] = [_fmt_float(x) for x in df[v]]
    _atomic_csv(path, out)


def write_context_csv(path, contexts: list[BuildingContext]) -> None:
    out = pd.DataFrame(
        [
            {
                "building_id": c.building_id,
                "lat": repr(float(c.lat)),
                "lon": repr(float(c.lon)),
                "area_m2": repr(float(c.area_m2)),
                "occupancy": repr(float(c.occupancy)),
                "roof_color": c.roof_color,
                "ceiling_board": "true" if c.ceiling_board else "false",
            }
            for c in contexts
        ],
        columns=CONTEXT_HEADER,
    )
    _atomic_csv(path, out)


def _atomic_csv(path, df: pd.DataFrame) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    df.to_csv(tmp, index=False)
    tmp.replace(path)
