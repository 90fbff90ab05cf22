"""On-disk dataset bundles: one directory per domain plus a provenance file.

Layout::

    <root>/provenance.json
    <root>/<domain>/sensors.csv
    <root>/<domain>/weather.csv
    <root>/<domain>/contexts.csv
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import IngestionError
from .csvio import (
    read_context_csv,
    read_sensor_csv,
    read_weather_csv,
    write_context_csv,
    write_sensor_csv,
    write_weather_csv,
)
from .synth import DomainData

PROVENANCE = "provenance.json"


@dataclass
class DatasetBundle:
    domains: dict[str, DomainData]
    source: str
    targets: list[str]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for d in self.domains.values():
            known = {c.building_id for c in d.contexts}
            missing = set(d.sensor["building_id"].unique()) - known
            if missing:
                raise IngestionError(f"{d.name}: sensor data for buildings without context: {sorted(missing)}")

    def domain(self, name: str) -> DomainData:
        try:
            return self.domains[name]
        except KeyError:
            raise IngestionError(f"unknown domain {name!r}; bundle has {', '.join(self.domains)}") from None

    def save(self, root) -> Path:
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        files = {}
        for name, d in self.domains.items():
            sub = root / name
            write_sensor_csv(sub / "sensors.csv", d.sensor)
            write_weather_csv(sub / "weather.csv", d.weather)
            write_context_csv(sub / "contexts.csv", d.contexts)
            files[name] = {"role": d.role, "sensors": f"{name}/sensors.csv", "weather": f"{name}/weather.csv", "contexts": f"{name}/contexts.csv"}
        meta = {"source": self.source, "targets": self.targets, "files": files, **self.provenance}
        tmp = root / (PROVENANCE + ".tmp")
        tmp.write_text(json.dumps(meta, indent=2, sort_keys=True))
        tmp.replace(root / PROVENANCE)
        return root

    @classmethod
    def load(cls, root) -> "DatasetBundle":
        root = Path(root)
        prov_path = root / PROVENANCE
        if not prov_path.exists():
            raise IngestionError(f"{root}: no {PROVENANCE}; not a dataset bundle")
        meta = json.loads(prov_path.read_text())
        domains = {}
        for name, f in meta["files"].items():
            sensor, _ = read_sensor_csv(root / f["sensors"])
            weather, _ = read_weather_csv(root / f["weather"])
            contexts = read_context_csv(root / f["contexts"])
            domains[name] = DomainData(name, f["role"], sensor, weather, contexts)
        extra = {k: v for k, v in meta.items() if k not in ("source", "targets", "files")}
        return cls(domains=domains, source=meta["source"], targets=list(meta["targets"]), provenance=extra)
