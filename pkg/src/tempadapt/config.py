"""Run configuration: one file (YAML or JSON) with flag overrides applied on top."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data.synth import SynthConfig
from .errors import ConfigError
from .model import get_variant
from .train import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    data_dir: str | None = None  # a saved bundle; None regenerates the synthetic data in memory
    output_dir: str = "runs"
    targets: list[str] | None = None
    variant: str = "full"
    purge: bool = True
    fetch_weather: bool = False  # fill weather gaps from the archive API
    workers: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        get_variant(self.variant)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # one seed drives everything
        if self.train.seed != self.seed or self.synth.seed != self.seed or self.train.variant != self.variant:
            object.__setattr__(self, "train", dataclasses.replace(self.train, seed=self.seed, variant=self.variant))
            object.__setattr__(self, "synth", dataclasses.replace(self.synth, seed=self.seed))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        train = self.train.to_dict()
        for k in ("seed", "variant"):
            train.pop(k)
        synth = self.synth.to_dict()
        synth.pop("seed")
        d["train"] = train
        d["synth"] = _plain(synth)
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = dict(d or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for section in ("train", "synth"):
            sub = d.get(section) or {}
            if not isinstance(sub, dict):
                raise ConfigError(f"{section}: expected a mapping")
            for k in ("seed", "variant"):
                if k in sub:
                    raise ConfigError(f"{section}.{k}: set {k} at the top level")
        if "train" in d:
            d["train"] = TrainConfig.from_dict(d["train"] or {})
        if "synth" in d:
            d["synth"] = SynthConfig.from_dict(d["synth"] or {})
        if d.get("targets") is not None:
            d["targets"] = list(d["targets"])
        return cls(**d)

    def with_overrides(self, **flags) -> "RunConfig":
        """Apply command-line overrides; ``None`` means "not given". Keys may be dotted (``train.epochs``)."""
        top, train, synth = {}, {}, {}
        for key, value in flags.items():
            if value is None:
                continue
            section, _, name = key.rpartition(".")
            {"": top, "train": train, "synth": synth}[section][name] = value
        cfg = self
        if train:
            cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, **train))
        if synth:
            cfg = dataclasses.replace(cfg, synth=dataclasses.replace(cfg.synth, **synth))
        if top:
            cfg = dataclasses.replace(cfg, **top)
        return cfg


def _plain(obj):
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return RunConfig.from_dict(data)


def dump_config(cfg: RunConfig, path) -> None:
    """Write the fully resolved config (defaults included)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(yaml.safe_dump(_plain(cfg.to_dict()), sort_keys=True))
