"""Metrics, the six-variant ablation harness and per-window forecast reports."""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ConfigError, TrainingDiverged
from .features import ColumnScaler
from .model import VARIANT_LABELS, VARIANTS, TempModel, get_variant
from .ndgrad import ShapeError
from .pipeline import Prepared
from .train import TrainConfig, TrainHistory, train
from .windows import WindowSet

log = logging.getLogger(__name__)

METRIC_NAMES = ("mae", "rmse", "mse_scaled", "huber_scaled")


@dataclass
class MetricsReport:
    mae: float
    rmse: float
    mse_scaled: float
    huber_scaled: float
    n_windows: int
    variant: str = ""
    domain: str = ""
    per_horizon_mae: list[float] = dataclasses.field(default_factory=list)

    def __post_init__(self):
        # power-mean inequality; a tiny slack absorbs rounding when all errors are equal
        if not (self.rmse >= self.mae * (1 - 1e-12) and self.mae >= 0 and self.mse_scaled >= 0):
            raise AssertionError(f"inconsistent metrics: mae={self.mae} rmse={self.rmse} mse={self.mse_scaled}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def compute_metrics(
    pred,
    obs,
    target_scaler: ColumnScaler,
    huber_delta: float = 1.0,
    variant: str = "",
    domain: str = "",
) -> MetricsReport:
    """Pooled MAE and RMSE in degC; MSE and Huber after standardising both sides."""
    pred = np.asarray(pred, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if pred.shape != obs.shape:
        raise ShapeError(f"compute_metrics: pred {pred.shape} vs obs {obs.shape}")
    if pred.size == 0:
        raise ShapeError("compute_metrics: empty input")
    err = pred - obs
    abs_err = np.abs(err)
    e_s = target_scaler.transform(pred) - target_scaler.transform(obs)
    a_s = np.abs(e_s)
    huber = np.where(a_s <= huber_delta, 0.5 * e_s**2, huber_delta * (a_s - 0.5 * huber_delta))
    return MetricsReport(
        mae=float(abs_err.mean()),
        rmse=float(np.sqrt(np.mean(err**2))),
        mse_scaled=float(np.mean(e_s**2)),
        huber_scaled=float(huber.mean()),
        n_windows=int(pred.shape[0]),
        variant=variant,
        domain=domain,
        per_horizon_mae=abs_err.mean(axis=0).tolist() if pred.ndim == 2 else [],
    )


def evaluate_model(model: TempModel, ws: WindowSet, target_scaler: ColumnScaler, variant: str, domain: str = "") -> MetricsReport:
    y_hat = model.predict(ws.X, ws.context, ws.t_last, get_variant(variant))[0]
    return compute_metrics(y_hat, ws.Y, target_scaler, variant=variant, domain=domain)


@dataclass
class AblationCell:
    domain: str
    variant: str
    report: MetricsReport | None
    error: str = ""
    history: TrainHistory | None = None

    @property
    def failed(self) -> bool:
        return self.report is None


@dataclass
class AblationTable:
    domains: list[str]
    variants: list[str]
    cells: dict[tuple[str, str], AblationCell]
    config: dict

    def mae(self, domain: str, variant: str) -> float:
        cell = self.cells[(domain, variant)]
        return float("nan") if cell.failed else cell.report.mae

    def records(self) -> list[dict]:
        out = []
        for d in self.domains:
            for v in self.variants:
                cell = self.cells[(d, v)]
                rec = {"domain": d, "variant": v, "label": VARIANT_LABELS[v], "status": "failed" if cell.failed else "ok"}
                if cell.failed:
                    rec["error"] = cell.error
                else:
                    rec.update({k: getattr(cell.report, k) for k in METRIC_NAMES + ("n_windows",)})
                out.append(rec)
        return out

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "records": self.records()}, indent=2, sort_keys=True)

    def render(self) -> str:
        """Aligned text: one row per variant, four metric columns per domain."""
        label_w = max(len(VARIANT_LABELS[v]) for v in self.variants) + 2
        col_w = 9
        group_w = col_w * len(METRIC_NAMES)
        head1 = " " * label_w + "".join(d.center(group_w) for d in self.domains)
        head2 = "Model".ljust(label_w) + "".join(
            "".join(h.rjust(col_w) for h in ("MAE", "RMSE", "MSE", "Huber")) for _ in self.domains
        )
        lines = [head1.rstrip(), head2, "-" * len(head2)]
        for v in self.variants:
            row = VARIANT_LABELS[v].ljust(label_w)
            for d in self.domains:
                cell = self.cells[(d, v)]
                if cell.failed:
                    row += "failed".rjust(group_w)
                else:
                    row += "".join(f"{getattr(cell.report, m):{col_w}.3f}" for m in METRIC_NAMES)
            lines.append(row)
        return "\n".join(lines) + "\n"


def _run_cell(prepared: Prepared, domain: str, cfg: TrainConfig) -> AblationCell:
    split = prepared.targets[domain]
    try:
        model, hist = train(None, prepared.source_train, split, cfg, prepared.target_scaler, prepared.source_val)
    except TrainingDiverged as exc:
        log.error("%s / %s diverged: %s", domain, cfg.variant, exc)
        return AblationCell(domain, cfg.variant, None, error=str(exc))
    report = evaluate_model(model, split.test, prepared.target_scaler, cfg.variant, domain)
    return AblationCell(domain, cfg.variant, report, history=hist)


def _run_cell_star(args):
    return _run_cell(*args)


def run_ablation(
    prepared: Prepared,
    cfg: TrainConfig = TrainConfig(),
    variants: list[str] | None = None,
    domains: list[str] | None = None,
    workers: int = 1,
) -> AblationTable:
    """Train every variant on every target domain with the same seed and data.

    A diverging run marks its cell failed and the harness moves on. With
    ``workers > 1`` cells run in separate processes; results do not depend
    on the worker count.
    """
    variants = list(VARIANTS) if variants is None else list(variants)
    domains = list(prepared.targets) if domains is None else list(domains)
    for v in variants:
        get_variant(v)
    for d in domains:
        if d not in prepared.targets:
            raise ConfigError(f"unknown target domain {d!r}; prepared: {', '.join(prepared.targets)}")
    jobs = [(prepared, d, dataclasses.replace(cfg, variant=v)) for d in domains for v in variants]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_star, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_cell(*job))
            cell = results[-1]
            log.info("%s / %s: %s", cell.domain, cell.variant, "failed" if cell.failed else f"MAE {cell.report.mae:.3f}")
    cells = {(c.domain, c.variant): c for c in results}
    base = cfg.to_dict()
    base.pop("variant")
    return AblationTable(domains, variants, cells, base)


def forecast_report(
    model: TempModel,
    ws: WindowSet,
    index: int = 0,
    variant: str = "full",
) -> pd.DataFrame:
    """24 hourly rows for one window: forecast, its components and the observation."""
    if not 0 <= index < len(ws):
        raise IndexError(f"window {index} outside 0..{len(ws) - 1}")
    one = ws.subset([index])
    y_hat, y_base, s_c, s_h, delta = model.predict(one.X, one.context, one.t_last, get_variant(variant))
    horizon = y_hat.shape[1]
    anchor = pd.Timestamp(one.anchors[0]).tz_localize("UTC")
    return pd.DataFrame(
        {
            "timestamp": pd.date_range(anchor + pd.Timedelta(hours=1), periods=horizon, freq="h"),
            "building_id": one.building_ids[0],
            "predicted_c": y_hat[0],
            "observed_c": one.Y[0],
            "y_base": y_base[0],
            "s_c": np.full(horizon, float(np.ravel(s_c[0])[0])),
            "s_h": np.full(horizon, float(np.ravel(s_h[0])[0])),
            "delta_ext": np.full(horizon, float(np.ravel(delta[0])[0])),
        }
    )
