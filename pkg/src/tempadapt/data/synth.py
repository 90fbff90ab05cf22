"""Synthetic naturally-ventilated buildings driven by a first-order RC model.

Each domain gets its own climate, building mix and RC parameter spread, so a
model trained on the source domain faces a genuine shift on the targets. The
RC constants here are generator conventions, not measured values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import ConfigError
from ..features import BuildingContext, encode_cyclical
from ..solar import solar_position


@dataclass(frozen=True)
class DomainSpec:
    name: str
    role: str  # "source" or "target"
    lat: float
    lon: float
    start: str  # ISO date, UTC midnight
    t_mean: float  # outdoor daily mean, degC
    t_amp: float  # outdoor diurnal half-range, degC
    t_drift: float = 0.0  # degC per 30 days
    rh_mean: float = 60.0
    alpha_scale: float = 1.0
    beta_scale: float = 1.0
    roof_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    ceiling_prob: float = 0.5
    area_range: tuple[float, float] = (40.0, 80.0)
    occupancy_range: tuple[float, float] = (20.0, 60.0)
    site_jitter_deg: float = 0.3


DEFAULT_DOMAINS = (
    DomainSpec("tanzania_synth", "source", -6.17, 35.74, "2023-07-17", t_mean=23.0, t_amp=6.0, t_drift=1.0, rh_mean=55.0),
    DomainSpec(
        "nigeria_synth", "target", 9.06, 7.49, "2024-02-01", t_mean=28.0, t_amp=6.5, t_drift=0.5, rh_mean=40.0,
        alpha_scale=0.8, beta_scale=1.7, roof_mix=(0.2, 0.3, 0.5), ceiling_prob=0.3,
        area_range=(50.0, 90.0), occupancy_range=(30.0, 70.0),
    ),
    DomainSpec(
        "gambia_synth", "target", 13.5734, -14.925, "2021-05-01", t_mean=29.0, t_amp=5.5, t_drift=0.5, rh_mean=65.0,
        alpha_scale=1.4, beta_scale=0.6, roof_mix=(0.4, 0.2, 0.4), ceiling_prob=0.0,
        area_range=(15.0, 30.0), occupancy_range=(2.0, 6.0), site_jitter_deg=0.01,
    ),
)


@dataclass(frozen=True)
class SynthConfig:
    n_buildings: int = 10
    days: int = 60
    sensor_interval_min: int = 10
    alpha: float = 0.2  # thermal coupling per hour
    alpha_spread: float = 0.15  # relative per-building jitter
    beta: float = 1.2  # solar gain, degC per hour at full sun and absorptivity 1
    beta_spread: float = 0.15
    absorptivity: tuple[float, float, float] = (0.3, 0.6, 0.9)  # light, medium, dark
    ceiling_factor: float = 0.6
    noise_std: float = 0.1  # process noise on the hourly RC update
    sensor_noise_std: float = 0.05
    weather_noise_std: float = 0.3
    daily_anomaly_std: float = 1.0
    gap_prob: float = 0.2  # chance a building has one sensor outage
    seed: int = 0
    domains: tuple[DomainSpec, ...] = DEFAULT_DOMAINS

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        a = self.absorptivity
        if not (len(a) == 3 and a[0] < a[1] < a[2]):
            raise ConfigError(f"absorptivities must increase light -> dark, got {a}")
        for name in ("noise_std", "sensor_noise_std", "weather_noise_std", "daily_anomaly_std"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.n_buildings < 1 or self.days < 1:
            raise ConfigError("need at least one building and one day")
        if 60 % self.sensor_interval_min:
            raise ConfigError("sensor_interval_min must divide 60")
        roles = [d.role for d in self.domains]
        if roles.count("source") != 1:
            raise ConfigError("exactly one source domain is required")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown synth config keys: {', '.join(sorted(unknown))}")
        if "domains" in d:
            d["domains"] = tuple(
                DomainSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in dom.items()}) for dom in d["domains"]
            )
        for k in ("absorptivity",):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class DomainData:
    name: str
    role: str
    sensor: pd.DataFrame  # sub-hourly readings
    weather: pd.DataFrame  # hourly
    contexts: list[BuildingContext]
    rc: pd.DataFrame = field(default_factory=pd.DataFrame)  # per-building generator parameters


def rc_step(t_in: float, t_out: float, alpha_eff: float, beta: float, sun: float, absorptivity: float, eps: float = 0.0) -> float:
    """One hourly update of the RC model."""
    return t_in + alpha_eff * (t_out - t_in) + beta * max(0.0, sun) * absorptivity + eps


def simulate_indoor(t_out, sun, alpha_eff, beta, absorptivity, t0, noise):
    """Run :func:`rc_step` over hourly series ``t_out`` and ``sun`` (sin of altitude)."""
    t = np.empty(len(t_out) + 1)
    t[0] = t0
    for k in range(len(t_out)):
        t[k + 1] = rc_step(t[k], t_out[k], alpha_eff, beta, sun[k], absorptivity, noise[k])
    return t


def dew_point(temp_c, rh):
    """Magnus approximation."""
    b, c = 17.62, 243.12
    g = np.log(np.clip(rh, 1e-3, 100.0) / 100.0) + b * temp_c / (c + temp_c)
    return c * g / (b - g)


def _weather(dom: DomainSpec, cfg: SynthConfig, hours: pd.DatetimeIndex, rng: np.random.Generator) -> pd.DataFrame:
    n = len(hours)
    days = np.arange(n) / 24.0
    n_days = int(np.ceil(n / 24)) + 1
    anomaly = np.zeros(n_days)
    for d in range(1, n_days):
        anomaly[d] = 0.6 * anomaly[d - 1] + rng.normal(0.0, cfg.daily_anomaly_std)
    daily = np.interp(days, np.arange(n_days), anomaly)
    local_hour = (hours.hour.to_numpy() + dom.lon / 15.0) % 24.0
    diurnal = dom.t_amp * np.cos(2 * np.pi * (local_hour - 15.0) / 24.0)
    t_out = dom.t_mean + dom.t_drift * days / 30.0 + daily + diurnal + rng.normal(0.0, cfg.weather_noise_std, n)
    rh = np.clip(dom.rh_mean - 2.5 * (diurnal + daily) + rng.normal(0.0, 3.0, n), 5.0, 100.0)
    semidiurnal, _ = encode_cyclical(2 * local_hour, 24.0)
    pressure = 1010.0 + 1.2 * semidiurnal + np.cumsum(rng.normal(0.0, 0.05, n))
    rain = rng.random(n) < 0.04
    precip = np.where(rain, rng.exponential(2.0, n), 0.0)
    return pd.DataFrame(
        {
            "timestamp": hours,
            "air_temp_c": t_out,
            "rel_humidity": rh,
            "dew_point_c": dew_point(t_out, rh),
            "surface_pressure_hpa": pressure,
            "total_precip_mm": precip,
        }
    )


def _domain(dom: DomainSpec, cfg: SynthConfig, rng: np.random.Generator) -> DomainData:
    hours = pd.date_range(pd.Timestamp(dom.start, tz="UTC"), periods=cfg.days * 24, freq="h")
    weather = _weather(dom, cfg, hours, rng)
    t_out = weather["air_temp_c"].to_numpy()
    roofs = ("light", "medium", "dark")
    steps = 60 // cfg.sensor_interval_min
    frac = np.arange(steps) / steps
    contexts, sensor_parts, rc_rows = [], [], []
    for b in range(cfg.n_buildings):
        bid = f"{dom.name.split('_')[0][:3]}_{b + 1:02d}"
        roof = roofs[int(rng.choice(3, p=np.asarray(dom.roof_mix) / np.sum(dom.roof_mix)))]
        ceiling = bool(rng.random() < dom.ceiling_prob)
        ctx = BuildingContext(
            building_id=bid,
            lat=round(dom.lat + rng.uniform(-dom.site_jitter_deg, dom.site_jitter_deg), 4),
            lon=round(dom.lon + rng.uniform(-dom.site_jitter_deg, dom.site_jitter_deg), 4),
            area_m2=round(rng.uniform(*dom.area_range), 1),
            occupancy=float(rng.integers(int(dom.occupancy_range[0]), int(dom.occupancy_range[1]) + 1)),
            roof_color=roof,
            ceiling_board=ceiling,
        )
        alpha = cfg.alpha * dom.alpha_scale * (1.0 + rng.uniform(-cfg.alpha_spread, cfg.alpha_spread))
        alpha_eff = alpha * (cfg.ceiling_factor if ceiling else 1.0)
        beta = cfg.beta * dom.beta_scale * (1.0 + rng.uniform(-cfg.beta_spread, cfg.beta_spread))
        absorb = cfg.absorptivity[roofs.index(roof)]
        _, alt = solar_position(hours, ctx.lat, ctx.lon)
        sun = np.sin(np.radians(alt))
        noise = rng.normal(0.0, cfg.noise_std, len(hours))
        t_in = simulate_indoor(t_out, sun, alpha_eff, beta, absorb, t_out[0] + 2.0, noise)
        # sub-hourly readings interpolate between consecutive hourly states
        readings = t_in[:-1, None] + (t_in[1:] - t_in[:-1])[:, None] * frac[None, :]
        readings = readings + rng.normal(0.0, cfg.sensor_noise_std, readings.shape)
        stamps = hours.tz_localize(None).to_numpy()[:, None] + (frac * 3600e9).astype("timedelta64[ns]")[None, :]
        keep = np.ones(len(hours), dtype=bool)
        if rng.random() < cfg.gap_prob:
            start = int(rng.integers(24, max(25, len(hours) - 48)))
            keep[start : start + int(rng.integers(2, 9))] = False
        sensor_parts.append(
            pd.DataFrame(
                {
                    "timestamp": pd.DatetimeIndex(stamps[keep].ravel()).tz_localize("UTC"),
                    "building_id": bid,
                    "indoor_temp_c": np.round(readings[keep].ravel(), 3),
                }
            )
        )
        contexts.append(ctx)
        rc_rows.append({"building_id": bid, "alpha_eff": alpha_eff, "beta": beta, "absorptivity": absorb})
    sensor = pd.concat(sensor_parts, ignore_index=True)
    return DomainData(dom.name, dom.role, sensor, weather, contexts, pd.DataFrame(rc_rows))


def generate_synthetic(cfg: SynthConfig = SynthConfig()):
    """Build a :class:`~tempadapt.data.bundle.DatasetBundle` of all configured domains."""
    from .bundle import DatasetBundle

    seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.domains))
    domains = {dom.name: _domain(dom, cfg, np.random.default_rng(s)) for dom, s in zip(cfg.domains, seeds)}
    source = next(d.name for d in cfg.domains if d.role == "source")
    targets = [d.name for d in cfg.domains if d.role == "target"]
    return DatasetBundle(
        domains=domains,
        source=source,
        targets=targets,
        provenance={"generator": "tempadapt.synth", "config": cfg.to_dict()},
    )
