"""Three-loss training with a gradient-reversal schedule.

Each optimiser step minimises::

    L = Huber(source) + w_cal * Huber(calibration) + 0.1 * BCE(domain)

where the BCE gradient reaching the backbone passes through the reversal
layer scaled by the scheduled lambda.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import ndgrad as nd
from .errors import ConfigError, TrainingDiverged
from .features import ColumnScaler
from .model import ModelConfig, TempModel, Variant, get_variant
from .windows import DomainSplit, WindowSet

log = logging.getLogger(__name__)

BCE_WEIGHT = 0.1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    cal_batch_size: int = 32
    domain_batch_size: int = 64
    epochs: int = 15
    lambda_max: float = 0.01
    warmup_epochs: int = 3
    w_cal: float = 1.0
    huber_delta: float = 1.0
    seed: int = 0
    hidden: int = 64
    variant: str = "full"

    def __post_init__(self):
        for name in ("lr", "batch_size", "cal_batch_size", "domain_batch_size", "epochs", "huber_delta", "hidden"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.lambda_max < 0 or self.w_cal < 0 or self.warmup_epochs < 0:
            raise ConfigError("lambda_max, w_cal and warmup_epochs must be >= 0")
        if self.domain_batch_size % 2 or self.domain_batch_size // 2 > self.batch_size:
            raise ConfigError("domain_batch_size must be even and at most twice batch_size")
        get_variant(self.variant)

    @property
    def effective_w_cal(self) -> float:
        """The calibration weight actually applied; the no-calibration variant forces 0."""
        return self.w_cal if get_variant(self.variant).use_cal else 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown train config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def lambda_schedule(epoch: int, step: int, steps_per_epoch: int, cfg: TrainConfig) -> float:
    """0 during warm-up, then ``lambda_max * (2 / (1 + exp(-10 p)) - 1)`` with p running 0 -> 1."""
    if epoch >= cfg.epochs:
        raise ConfigError(f"epoch {epoch} outside 0..{cfg.epochs - 1}")
    if epoch < cfg.warmup_epochs:
        return 0.0
    total = (cfg.epochs - cfg.warmup_epochs) * steps_per_epoch
    done = (epoch - cfg.warmup_epochs) * steps_per_epoch + step
    p = 1.0 if total <= 1 else min(1.0, done / (total - 1))
    return cfg.lambda_max * (2.0 / (1.0 + math.exp(-10.0 * p)) - 1.0)


@dataclass
class Batch:
    x: np.ndarray
    context: np.ndarray
    t_last: np.ndarray
    y: np.ndarray | None = None

    @classmethod
    def of(cls, ws: WindowSet, idx=None) -> "Batch":
        if idx is None:
            return cls(ws.X, ws.context, ws.t_last, ws.Y)
        return cls(ws.X[idx], ws.context[idx], ws.t_last[idx], ws.Y[idx])

    def __len__(self) -> int:
        return int(self.x.shape[0])


@dataclass
class DomainBatch:
    """Balanced discriminator batch.

    The source half (label 0) is the first ``n_source`` windows of the
    source batch, so those windows are forwarded once; ``target`` holds the
    unlabelled target windows (label 1).
    """

    n_source: int
    target: Batch

    def __len__(self) -> int:
        return self.n_source + len(self.target)

    @property
    def labels(self) -> np.ndarray:
        return np.r_[np.zeros(self.n_source), np.ones(len(self.target))].reshape(-1, 1)


@dataclass
class LossParts:
    total: nd.Tensor
    source: float
    calibration: float
    domain: float


def total_loss(
    model: TempModel,
    src: Batch,
    cal: Batch | None,
    domain: DomainBatch | None,
    lam: float,
    cfg: TrainConfig,
    target_scaler: ColumnScaler,
    variant: Variant | None = None,
) -> LossParts:
    """Forward all three batches in one pass and combine the losses.

    Huber terms are computed on standardised temperatures. The calibration
    term drops out when ``cal`` is empty or the variant disables it; the
    domain term drops out when the variant has no discriminator.
    """
    if src is None or len(src) == 0:
        raise nd.UsageError("total_loss needs a non-empty source batch")
    variant = variant or get_variant(cfg.variant)
    w_cal = cfg.w_cal if variant.use_cal else 0.0
    use_cal = cal is not None and len(cal) > 0 and w_cal > 0
    use_dom = variant.use_adv and domain is not None and len(domain) > 0
    if use_dom and domain.n_source > len(src):
        raise nd.UsageError(f"domain batch wants {domain.n_source} source windows, source batch has {len(src)}")
    parts = [src] + ([cal] if use_cal else []) + ([domain.target] if use_dom else [])
    x = np.concatenate([b.x for b in parts])
    ctx = np.concatenate([b.context for b in parts])
    tl = np.concatenate([b.t_last for b in parts])
    out = model.forward(x, ctx, tl, lam, variant)

    inv = 1.0 / target_scaler.std
    n_src = len(src)
    pred = nd.scale(out.y_hat, inv)
    l_src = nd.huber_loss(nd.index(pred, slice(0, n_src)), src.y * inv, cfg.huber_delta)
    total = l_src
    l_cal_v = 0.0
    start = n_src
    if use_cal:
        n_cal = len(cal)
        l_cal = nd.huber_loss(nd.index(pred, slice(start, start + n_cal)), cal.y * inv, cfg.huber_delta)
        start += n_cal
        total = nd.add(total, nd.scale(l_cal, w_cal))
        l_cal_v = l_cal.item()
    l_dom_v = 0.0
    if use_dom:
        rows = np.r_[0 : domain.n_source, start : start + len(domain.target)]
        l_dom = nd.bce_loss(nd.index(out.domain_prob, rows), domain.labels)
        total = nd.add(total, nd.scale(l_dom, BCE_WEIGHT))
        l_dom_v = l_dom.item()
    return LossParts(total, l_src.item(), l_cal_v, l_dom_v)


@dataclass
class StepRecord:
    epoch: int
    step: int
    lam: float
    source: float
    calibration: float
    domain: float
    total: float


@dataclass
class EpochRecord:
    epoch: int
    lam: float
    source: float
    calibration: float
    domain: float
    total: float
    val_mae: float


@dataclass
class TrainHistory:
    variant: str
    config: dict
    epochs: list[EpochRecord] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(dataclasses.asdict(e), sort_keys=True) + "\n" for e in self.epochs)

    def steps_jsonl(self) -> str:
        return "".join(json.dumps(dataclasses.asdict(s), sort_keys=True) + "\n" for s in self.steps)

    def write(self, path, steps_path=None) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())
        if steps_path is not None:
            with open(steps_path, "w") as fh:
                fh.write(self.steps_jsonl())

    @classmethod
    def read(cls, path, variant: str = "", config: dict | None = None) -> "TrainHistory":
        with open(path) as fh:
            epochs = [EpochRecord(**json.loads(line)) for line in fh if line.strip()]
        return cls(variant, config or {}, epochs)


class _Cycler:
    """Endless reshuffled pass over ``n`` indices."""

    def __init__(self, n: int, rng: np.random.Generator):
        self.n = n
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def take(self, k: int) -> np.ndarray:
        out = []
        while k > 0:
            if self.pos >= self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            chunk = self.order[self.pos : self.pos + k]
            self.pos += len(chunk)
            k -= len(chunk)
            out.append(chunk)
        return np.concatenate(out)


def evaluate_mae(model: TempModel, ws: WindowSet, variant: Variant) -> float:
    if len(ws) == 0:
        return float("nan")
    y_hat = model.predict(ws.X, ws.context, ws.t_last, variant)[0]
    return float(np.mean(np.abs(y_hat - ws.Y)))


def train(
    model: TempModel | None,
    source: WindowSet,
    split: DomainSplit,
    cfg: TrainConfig,
    target_scaler: ColumnScaler,
    source_val: WindowSet | None = None,
) -> tuple[TempModel, TrainHistory]:
    """Train ``model`` (or a fresh one when None) for ``cfg.variant``.

    Deterministic for a fixed ``cfg.seed``: initialisation and each batch
    stream draw from their own child of one seed sequence.
    """
    variant = get_variant(cfg.variant)
    if len(source) == 0:
        raise ConfigError("empty source window set")
    init_seq, data_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    if model is None:
        mcfg = ModelConfig(n_dyn=source.X.shape[2], n_ctx=source.context.shape[1], window=source.X.shape[1],
                           horizon=source.Y.shape[1], hidden=cfg.hidden)
        model = TempModel.init(mcfg, seed=int(init_seq.generate_state(1)[0]))
    src_rng, cal_rng, unsup_rng = (np.random.default_rng(s) for s in data_seq.spawn(3))
    params = model.trainable(variant)
    opt = nd.Adam(params, lr=cfg.lr)

    bs = cfg.batch_size
    steps_per_epoch = max(1, len(source) // bs)
    half = cfg.domain_batch_size // 2
    cal_cycle = _Cycler(len(split.cal), cal_rng) if len(split.cal) else None
    unsup_cycle = _Cycler(len(split.unsup), unsup_rng) if len(split.unsup) else None

    history = TrainHistory(variant.name, cfg.to_dict())
    for epoch in range(cfg.epochs):
        order = src_rng.permutation(len(source))
        recs = []
        for step in range(steps_per_epoch):
            lam = lambda_schedule(epoch, step, steps_per_epoch, cfg) if variant.use_adv else 0.0
            src = Batch.of(source, order[step * bs : (step + 1) * bs])
            cal = None
            if cal_cycle is not None and cfg.effective_w_cal > 0:
                cal = Batch.of(split.cal, cal_cycle.take(cfg.cal_batch_size))
            dom = None
            if variant.use_adv and unsup_cycle is not None:
                # the source batch is already a random draw, so its head is a random source half
                dom = DomainBatch(min(half, len(src)), Batch.of(split.unsup, unsup_cycle.take(half)))
            parts = total_loss(model, src, cal, dom, lam, cfg, target_scaler, variant)
            value = parts.total.item()
            if not math.isfinite(value):
                exc = TrainingDiverged(epoch, step, value)
                exc.history = history
                raise exc
            opt.zero_grad()
            parts.total.backward()
            opt.step()
            rec = StepRecord(epoch, step, lam, parts.source, parts.calibration, parts.domain, value)
            history.steps.append(rec)
            recs.append(rec)
        val = evaluate_mae(model, source_val, variant) if source_val is not None else float("nan")
        history.epochs.append(
            EpochRecord(
                epoch=epoch,
                lam=recs[-1].lam,
                source=float(np.mean([r.source for r in recs])),
                calibration=float(np.mean([r.calibration for r in recs])),
                domain=float(np.mean([r.domain for r in recs])),
                total=float(np.mean([r.total for r in recs])),
                val_mae=val,
            )
        )
        log.info("epoch %d: total %.4f src %.4f cal %.4f bce %.4f lam %.4f val_mae %.3f", epoch,
                 history.epochs[-1].total, history.epochs[-1].source, history.epochs[-1].calibration,
                 history.epochs[-1].domain, history.epochs[-1].lam, val)
    return model, history
