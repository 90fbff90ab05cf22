"""From a dataset bundle to scaled window sets ready for training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

from .data.bundle import DatasetBundle
from .data.synth import DomainData
from .errors import IngestionError
from .features import (
    SCALED_COLUMNS,
    TARGET_SCALE_COLUMN,
    ColumnScaler,
    FeatureFrame,
    Scaler,
    aggregate_hourly,
    apply_scaler,
    build_frame,
    fit_scaler,
)
from .windows import DomainSplit, WindowSet, holdout_tail, make_windows, split_target


def domain_frame(d: DomainData) -> FeatureFrame:
    return build_frame(aggregate_hourly(d.sensor), d.weather, d.contexts)


@dataclass
class Prepared:
    scaler: Scaler
    source_train: WindowSet
    source_val: WindowSet
    targets: dict[str, DomainSplit]
    frames: dict[str, FeatureFrame]  # scaled

    @property
    def target_scaler(self) -> ColumnScaler:
        return self.scaler.column(TARGET_SCALE_COLUMN)


def prepare(bundle: DatasetBundle, targets: list[str] | None = None, purge: bool = True) -> Prepared:
    """Fit the scaler on the source domain only and window every domain with it."""
    targets = list(bundle.targets if targets is None else targets)
    for t in targets:
        if t == bundle.source:
            raise IngestionError(f"{t!r} is the source domain, not a target")
        bundle.domain(t)
    raw = {name: domain_frame(bundle.domain(name)) for name in [bundle.source] + targets}
    scaler = fit_scaler(raw[bundle.source].table, SCALED_COLUMNS)
    frames = {name: apply_scaler(scaler, f) for name, f in raw.items()}
    src_train, src_val = holdout_tail(make_windows(frames[bundle.source]))
    splits = {t: split_target(make_windows(frames[t]), purge=purge) for t in targets}
    return Prepared(scaler, src_train, src_val, splits, frames)
