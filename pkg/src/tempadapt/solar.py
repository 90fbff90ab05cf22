"""Sun position following the NOAA solar calculator equations.

Both methods run the same chain: equation of time and declination -> true
solar time -> hour angle -> zenith/altitude and azimuth. ``"noaa"`` derives
the orbital terms from Julian centuries (the NOAA spreadsheet, ~0.01 deg);
``"fractional_year"`` uses the short Fourier series from NOAA's general
solar position note (~0.3 deg, which can reach >1 deg of azimuth near zenith).
"""

from __future__ import annotations

import numpy as np
import pandas as pd


_EPOCH = pd.Timestamp("1970-01-01", tz="UTC")


def _as_utc_index(t) -> pd.DatetimeIndex:
    idx = pd.DatetimeIndex(np.atleast_1d(pd.to_datetime(t)))
    if idx.tz is None:
        return idx.tz_localize("UTC")
    return idx.tz_convert("UTC")


def _fractional_year_terms(idx: pd.DatetimeIndex, hour: np.ndarray):
    days_in_year = np.where(idx.is_leap_year, 366.0, 365.0)
    gamma = 2.0 * np.pi / days_in_year * (idx.dayofyear - 1 + (hour - 12.0) / 24.0)
    gamma = np.asarray(gamma, dtype=np.float64)
    eqtime = 229.18 * (
        0.000075
        + 0.001868 * np.cos(gamma)
        - 0.032077 * np.sin(gamma)
        - 0.014615 * np.cos(2 * gamma)
        - 0.040849 * np.sin(2 * gamma)
    )
    decl = (
        0.006918
        - 0.399912 * np.cos(gamma)
        + 0.070257 * np.sin(gamma)
        - 0.006758 * np.cos(2 * gamma)
        + 0.000907 * np.sin(2 * gamma)
        - 0.002697 * np.cos(3 * gamma)
        + 0.00148 * np.sin(3 * gamma)
    )
    return eqtime, decl


def _julian_century_terms(idx: pd.DatetimeIndex):
    days = np.asarray((idx - _EPOCH) / pd.Timedelta(days=1), dtype=np.float64)
    jc = (days + 2440587.5 - 2451545.0) / 36525.0
    l0 = np.mod(280.46646 + jc * (36000.76983 + jc * 0.0003032), 360.0)
    m = 357.52911 + jc * (35999.05029 - 0.0001537 * jc)
    e = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc)
    m_r = np.radians(m)
    center = (
        np.sin(m_r) * (1.914602 - jc * (0.004817 + 0.000014 * jc))
        + np.sin(2 * m_r) * (0.019993 - 0.000101 * jc)
        + np.sin(3 * m_r) * 0.000289
    )
    omega = np.radians(125.04 - 1934.136 * jc)
    app_long = l0 + center - 0.00569 - 0.00478 * np.sin(omega)
    mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0
    obliq = np.radians(mean_obliq + 0.00256 * np.cos(omega))
    decl = np.arcsin(np.sin(obliq) * np.sin(np.radians(app_long)))
    y = np.tan(obliq / 2.0) ** 2
    l0_r = np.radians(l0)
    eqtime = 4.0 * np.degrees(
        y * np.sin(2 * l0_r)
        - 2 * e * np.sin(m_r)
        + 4 * e * y * np.sin(m_r) * np.cos(2 * l0_r)
        - 0.5 * y * y * np.sin(4 * l0_r)
        - 1.25 * e * e * np.sin(2 * m_r)
    )
    return eqtime, decl


def solar_position(t, lat, lon, method: str = "noaa"):
    """Return ``(azimuth_deg, altitude_deg)`` for UTC instant(s) ``t``.

    Azimuth is measured clockwise from north. Naive timestamps are read as
    UTC. Scalars in give scalars out. No refraction correction is applied.
    """
    scalar = np.ndim(t) == 0 and np.ndim(lat) == 0 and np.ndim(lon) == 0
    idx = _as_utc_index(t)
    hour = np.asarray(idx.hour + idx.minute / 60.0 + (idx.second + idx.microsecond / 1e6) / 3600.0, dtype=np.float64)
    if method == "noaa":
        eqtime, decl = _julian_century_terms(idx)
    elif method == "fractional_year":
        eqtime, decl = _fractional_year_terms(idx, hour)
    else:
        raise ValueError(f"unknown solar position method {method!r}")

    lat_r = np.radians(np.asarray(lat, dtype=np.float64))
    lon_d = np.asarray(lon, dtype=np.float64)
    # minutes; timestamps are UTC so there is no zone offset term
    true_solar = hour * 60.0 + eqtime + 4.0 * lon_d
    ha = np.radians(true_solar / 4.0 - 180.0)

    cos_zen = np.sin(lat_r) * np.sin(decl) + np.cos(lat_r) * np.cos(decl) * np.cos(ha)
    zen = np.arccos(np.clip(cos_zen, -1.0, 1.0))
    altitude = 90.0 - np.degrees(zen)
    azimuth = np.degrees(
        np.arctan2(np.sin(ha), np.cos(ha) * np.sin(lat_r) - np.tan(decl) * np.cos(lat_r))
    )
    azimuth = np.mod(azimuth + 180.0, 360.0)
    if scalar:
        return float(azimuth[0]), float(altitude[0])
    return azimuth, altitude
