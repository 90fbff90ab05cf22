"""Command-line entry point: ``tempadapt {synth,train,evaluate,ablate,forecast}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 training diverged.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .config import RunConfig, dump_config, load_config
from .data import DatasetBundle, fetch_weather_archive, generate_synthetic, merge_weather
from .errors import ConfigError, DataError, TrainingDiverged
from .evaluate import evaluate_model, forecast_report, run_ablation
from .features import Scaler
from .model import VARIANTS, load_checkpoint, save_checkpoint
from .ndgrad import ShapeError
from .pipeline import prepare
from .train import train
from .windows import window_at

log = logging.getLogger("tempadapt")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit 2, which is our data-error code
        raise UsageError(f"{self.prog}: {message}")


def _fill_weather(bundle: DatasetBundle, cache_dir=None) -> None:
    for d in bundle.domains.values():
        lat = float(np.mean([c.lat for c in d.contexts]))
        lon = float(np.mean([c.lon for c in d.contexts]))
        ts = pd.to_datetime(d.sensor["timestamp"], utc=True)
        api = fetch_weather_archive(round(lat, 4), round(lon, 4), ts.min().date(), ts.max().date(), cache_dir)
        d.weather, conflicts = merge_weather(d.weather, api)
        if conflicts:
            log.warning("%s: %d weather values differ from the archive; file values kept", d.name, conflicts)


def load_bundle(cfg: RunConfig) -> DatasetBundle:
    if cfg.data_dir:
        bundle = DatasetBundle.load(cfg.data_dir)
    else:
        bundle = generate_synthetic(cfg.synth)
    if cfg.fetch_weather:
        _fill_weather(bundle)
    return bundle


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    flags = {
        "seed": getattr(args, "seed", None),
        "data_dir": str(Path(args.data).resolve()) if getattr(args, "data", None) else None,
        "output_dir": getattr(args, "out", None),
        "variant": getattr(args, "variant", None),
        "workers": getattr(args, "workers", None),
        "train.epochs": getattr(args, "epochs", None),
        "synth.days": getattr(args, "days", None),
        "synth.n_buildings": getattr(args, "n_buildings", None),
    }
    targets = getattr(args, "target", None)
    if targets:
        flags["targets"] = list(targets)
    return cfg.with_overrides(**flags)


def cmd_synth(args) -> int:
    cfg = _resolve(args)
    out = Path(cfg.output_dir)
    bundle = generate_synthetic(cfg.synth)
    bundle.save(out)
    dump_config(cfg, out / "config.yaml")
    print(f"wrote {len(bundle.domains)} domains to {out}")
    return EXIT_OK


def _one_target(cfg: RunConfig, bundle: DatasetBundle) -> str:
    targets = cfg.targets or bundle.targets
    if len(targets) != 1:
        raise UsageError(f"choose one target with --target (available: {', '.join(bundle.targets)})")
    return targets[0]


def cmd_train(args) -> int:
    cfg = _resolve(args)
    bundle = load_bundle(cfg)
    target = _one_target(cfg, bundle)
    prepared = prepare(bundle, [target], purge=cfg.purge)
    out = Path(cfg.output_dir) / target / cfg.variant
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    try:
        model, hist = train(None, prepared.source_train, prepared.targets[target], cfg.train,
                            prepared.target_scaler, prepared.source_val)
    except TrainingDiverged as exc:
        if exc.history is not None:
            exc.history.write(out / "history.jsonl", out / "steps.jsonl")
        (out / "diverged.json").write_text(json.dumps({"epoch": exc.epoch, "step": exc.step, "value": repr(exc.value)}))
        raise
    hist.write(out / "history.jsonl", out / "steps.jsonl")
    meta = {"run_config": cfg.to_dict(), "target": target, "variant": cfg.variant,
            "scaler": prepared.scaler.to_dict(), "effective_w_cal": cfg.train.effective_w_cal}
    save_checkpoint(out / "checkpoint.npz", model, meta)
    last = hist.epochs[-1]
    print(f"trained {cfg.variant} on {target}: final loss {last.total:.4f}, source val MAE {last.val_mae:.3f} degC")
    print(f"checkpoint: {out / 'checkpoint.npz'}")
    return EXIT_OK


def _from_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    model, meta = load_checkpoint(path)
    cfg = RunConfig.from_dict(meta["run_config"])
    bundle = load_bundle(cfg)
    prepared = prepare(bundle, [meta["target"]], purge=cfg.purge)
    if prepared.scaler.to_dict() != Scaler.from_dict(meta["scaler"]).to_dict():
        raise DataError(f"{path}: data no longer matches the scaler stored with the checkpoint")
    return model, meta, prepared


def cmd_evaluate(args) -> int:
    model, meta, prepared = _from_checkpoint(args.checkpoint)
    target = args.target or meta["target"]
    if target != meta["target"]:
        raise UsageError(f"checkpoint was adapted to {meta['target']!r}, not {target!r}")
    report = evaluate_model(model, prepared.targets[target].test, prepared.target_scaler, meta["variant"], target)
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    text = (f"{target} / {meta['variant']} ({report.n_windows} test windows)\n"
            f"MAE {report.mae:.3f} degC  RMSE {report.rmse:.3f} degC  MSE {report.mse_scaled:.3f}  Huber {report.huber_scaled:.3f}\n")
    (out / "metrics.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _resolve(args)
    bundle = load_bundle(cfg)
    prepared = prepare(bundle, cfg.targets, purge=cfg.purge)
    table = run_ablation(prepared, cfg.train, workers=cfg.workers)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    (out / "ablation.txt").write_text(table.render())
    (out / "ablation.json").write_text(table.to_json())
    print(table.render(), end="")
    return EXIT_OK


def cmd_forecast(args) -> int:
    model, meta, prepared = _from_checkpoint(args.checkpoint)
    frame = next((f for f in prepared.frames.values() if (f.table["building_id"] == args.building).any()), None)
    if frame is None:
        known = sorted({b for f in prepared.frames.values() for b in f.table["building_id"].unique()})
        raise DataError(f"unknown building {args.building!r}; known: {', '.join(known)}")
    try:
        anchor = pd.Timestamp(args.timestamp)
    except ValueError:
        raise UsageError(f"not a timestamp: {args.timestamp!r}") from None
    ws = window_at(frame, args.building, anchor)
    report = forecast_report(model, ws, 0, meta["variant"])
    report["timestamp"] = report["timestamp"].dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        report.to_csv(args.out, index=False)
        print(f"wrote {len(report)} rows to {args.out}")
    else:
        report.to_csv(sys.stdout, index=False)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tempadapt", description="Cross-country indoor temperature forecasting.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, out_help="output directory"):
        sp.add_argument("--config", help="YAML or JSON run config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help=out_help)

    sp = sub.add_parser("synth", help="write a synthetic dataset bundle")
    common(sp, "bundle directory")
    sp.add_argument("--days", type=int)
    sp.add_argument("--n-buildings", type=int, dest="n_buildings")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train one variant on one target domain")
    common(sp)
    sp.add_argument("--data", help="dataset bundle directory (default: regenerate synthetic data)")
    sp.add_argument("--variant", choices=list(VARIANTS))
    sp.add_argument("--target", action="append", help="target domain")
    sp.add_argument("--epochs", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="test-set metrics for a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--target")
    sp.add_argument("--out", help="directory for metrics files (default: beside the checkpoint)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ablate", help="train and evaluate all six variants")
    common(sp)
    sp.add_argument("--data")
    sp.add_argument("--target", action="append", help="target domain (repeatable; default: all)")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("forecast", help="24-hour forecast CSV for one building and time")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--building", required=True)
    sp.add_argument("--timestamp", required=True, help="last observed hour, e.g. 2024-03-20T09:00Z")
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_forecast)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("tempadapt: choose a command (synth, train, evaluate, ablate, forecast)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
