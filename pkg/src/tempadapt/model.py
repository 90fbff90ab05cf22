"""LSTM backbone with external-correction, physical-modulation and domain-discriminator heads.

The final forecast composes the parts as::

    y_hat = y_base * s_c + delta_ext + s_h
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from . import ndgrad as nd
from .errors import ConfigError
from .ndgrad import ShapeError, Tensor

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Variant:
    """Which components are active. Ablations switch parts off; the code path is shared."""

    name: str
    use_adv: bool = True
    use_cal: bool = True
    use_phy: bool = True
    use_ext: bool = True


VARIANTS: dict[str, Variant] = {
    "full": Variant("full"),
    "no_adv": Variant("no_adv", use_adv=False),
    "no_cal": Variant("no_cal", use_cal=False),
    "no_phy": Variant("no_phy", use_phy=False),
    "no_ext": Variant("no_ext", use_ext=False),
    "lstm_only": Variant("lstm_only", use_adv=False, use_phy=False, use_ext=False),
}

# row labels in the layout of the published ablation table
VARIANT_LABELS = {
    "full": "Full model",
    "no_adv": "- Adv",
    "no_cal": "- Cal",
    "no_phy": "- F_phy",
    "no_ext": "- F_ext",
    "lstm_only": "LSTM only",
}


def get_variant(name: str) -> Variant:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ConfigError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}") from None


@dataclass(frozen=True)
class ModelConfig:
    n_dyn: int
    n_ctx: int = 4
    window: int = 12
    horizon: int = 24
    hidden: int = 64
    ext_hidden: int = 32
    phy_hidden: int = 16
    disc_hidden: int = 32
    sc_range: float = 0.1


@dataclass
class ForwardOutput:
    y_hat: Tensor
    y_base: Tensor
    s_c: Tensor
    s_h: Tensor
    delta_ext: Tensor
    domain_prob: Tensor | None
    final_hidden: Tensor


def _shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    h = cfg.hidden
    return {
        "lstm.w_x": (cfg.n_dyn, 4 * h),
        "lstm.w_h": (h, 4 * h),
        "lstm.b": (4 * h,),
        "head.w": (h, cfg.horizon),
        "head.b": (cfg.horizon,),
        "ext.w1": (cfg.n_dyn, cfg.ext_hidden),
        "ext.b1": (cfg.ext_hidden,),
        "ext.w2": (cfg.ext_hidden, 1),
        "ext.b2": (1,),
        "phy.w1": (cfg.n_ctx, cfg.phy_hidden),
        "phy.b1": (cfg.phy_hidden,),
        "phy.w2": (cfg.phy_hidden, 2),
        "phy.b2": (2,),
        "disc.w1": (h, cfg.disc_hidden),
        "disc.b1": (cfg.disc_hidden,),
        "disc.w2": (cfg.disc_hidden, 1),
        "disc.b2": (1,),
    }


def _fan_in(name: str, shapes: dict[str, tuple[int, ...]]) -> int:
    # biases share the bound of their layer's weight matrix
    if name == "lstm.b":
        return shapes["lstm.w_h"][0]
    layer, _, leaf = name.partition(".")
    if leaf.startswith("b"):
        return shapes[f"{layer}.w{leaf[1:]}"][0]
    return shapes[name][0]


class TempModel:
    """Parameter container plus the forward composition."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor]):
        expected = _shapes(cfg)
        if set(params) != set(expected):
            raise ShapeError(f"parameter names {sorted(params)} do not match {sorted(expected)}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {params[name].shape}")
        self.cfg = cfg
        self.params = params

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int = 0) -> "TempModel":
        rng = np.random.default_rng(seed)
        params = {}
        shapes = _shapes(cfg)
        for name, shape in shapes.items():
            k = 1.0 / np.sqrt(_fan_in(name, shapes))
            params[name] = Tensor(rng.uniform(-k, k, size=shape), requires_grad=True, name=name)
        # forget-gate bias starts at 1
        h = cfg.hidden
        params["lstm.b"].data[h : 2 * h] = 1.0
        return cls(cfg, params)

    @classmethod
    def zeros(cls, cfg: ModelConfig) -> "TempModel":
        return cls(cfg, {n: Tensor(np.zeros(s), requires_grad=True, name=n) for n, s in _shapes(cfg).items()})

    def parameters(self, prefixes: tuple[str, ...] | None = None) -> list[Tensor]:
        names = sorted(self.params)
        if prefixes is not None:
            names = [n for n in names if n.startswith(prefixes)]
        return [self.params[n] for n in names]

    def trainable(self, variant: Variant) -> list[Tensor]:
        """Parameters that actually receive gradient under ``variant``."""
        prefixes = ["lstm.", "head."]
        if variant.use_ext:
            prefixes.append("ext.")
        if variant.use_phy:
            prefixes.append("phy.")
        if variant.use_adv:
            prefixes.append("disc.")
        return self.parameters(tuple(prefixes))

    def n_parameters(self, variant: Variant | None = None) -> int:
        ps = self.parameters() if variant is None else self.trainable(variant)
        return int(sum(p.size for p in ps))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    # --- branches -----------------------------------------------------

    def lstm_backbone(self, x: np.ndarray, t_last: np.ndarray) -> tuple[Tensor, Tensor]:
        """Run the LSTM on first differences of the window; anchor cumulative deltas at ``t_last``."""
        cfg = self.cfg
        if x.ndim != 3 or x.shape[1] != cfg.window or x.shape[2] != cfg.n_dyn:
            raise ShapeError(f"window batch must be (N, {cfg.window}, {cfg.n_dyn}), got {x.shape}")
        p = self.params
        x_diff = Tensor(np.diff(x, axis=1))
        hidden = nd.lstm(x_diff, p["lstm.w_x"], p["lstm.w_h"], p["lstm.b"])
        deltas = nd.linear(hidden, p["head.w"], p["head.b"])
        anchor = Tensor(np.asarray(t_last, dtype=np.float64).reshape(-1, 1))
        return nd.add(anchor, nd.cumsum(deltas, axis=1)), hidden

    def f_ext(self, last_step: np.ndarray) -> Tensor:
        p = self.params
        z = nd.tanh(nd.linear(Tensor(last_step), p["ext.w1"], p["ext.b1"]))
        return nd.linear(z, p["ext.w2"], p["ext.b2"])

    def f_phy(self, context: np.ndarray) -> tuple[Tensor, Tensor]:
        p = self.params
        z = nd.tanh(nd.linear(Tensor(context), p["phy.w1"], p["phy.b1"]))
        u = nd.linear(z, p["phy.w2"], p["phy.b2"])
        s_c = nd.add(1.0, nd.scale(nd.tanh(nd.index(u, (slice(None), slice(0, 1)))), self.cfg.sc_range))
        s_h = nd.index(u, (slice(None), slice(1, 2)))
        return s_c, s_h

    def discriminate(self, hidden: Tensor, lambda_adv: float) -> Tensor:
        p = self.params
        z = nd.tanh(nd.linear(nd.grad_reverse(hidden, lambda_adv), p["disc.w1"], p["disc.b1"]))
        return nd.sigmoid(nd.linear(z, p["disc.w2"], p["disc.b2"]))

    def forward(
        self,
        x: np.ndarray,
        context: np.ndarray,
        t_last: np.ndarray,
        lambda_adv: float = 0.0,
        variant: Variant = VARIANTS["full"],
    ) -> ForwardOutput:
        """Forecast a batch of windows. ``x`` is (N, W, F_dyn) absolute scaled features."""
        n = x.shape[0]
        y_base, hidden = self.lstm_backbone(x, t_last)
        if variant.use_ext:
            delta = self.f_ext(x[:, -1, :])
        else:
            delta = Tensor(np.zeros((n, 1)))
        if variant.use_phy:
            s_c, s_h = self.f_phy(context)
        else:
            s_c, s_h = Tensor(np.ones((n, 1))), Tensor(np.zeros((n, 1)))
        y_hat = nd.add(nd.add(nd.mul(y_base, s_c), delta), s_h)
        prob = self.discriminate(hidden, lambda_adv) if variant.use_adv else None
        return ForwardOutput(y_hat, y_base, s_c, s_h, delta, prob, hidden)

    def predict(self, x, context, t_last, variant: Variant = VARIANTS["full"], batch_size: int = 512):
        """Gradient-free forecasts as numpy, returning (y_hat, y_base, s_c, s_h, delta_ext)."""
        parts = []
        saved = {k: p.requires_grad for k, p in self.params.items()}
        try:
            for p in self.params.values():
                p.requires_grad = False
            for s in range(0, x.shape[0], batch_size):
                sl = slice(s, s + batch_size)
                out = self.forward(x[sl], context[sl], t_last[sl], 0.0, variant)
                parts.append(
                    (out.y_hat.data, out.y_base.data, out.s_c.data[:, 0], out.s_h.data[:, 0], out.delta_ext.data[:, 0])
                )
        finally:
            for k, p in self.params.items():
                p.requires_grad = saved[k]
        if not parts:
            h = self.cfg.horizon
            return np.zeros((0, h)), np.zeros((0, h)), np.zeros(0), np.zeros(0), np.zeros(0)
        return tuple(np.concatenate(c, axis=0) for c in zip(*parts))


# --- checkpoints ------------------------------------------------------


def save_checkpoint(path, model: TempModel, meta: dict | None = None) -> None:
    """Write all named parameters plus JSON metadata to an ``.npz`` file atomically."""
    header = {"version": CHECKPOINT_VERSION, "model": asdict(model.cfg), "meta": meta or {}}
    arrays = {f"param/{k}": v.data for k, v in model.params.items()}
    arrays["header"] = np.array(json.dumps(header, sort_keys=True))
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> tuple[TempModel, dict]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        params = {
            k[len("param/") :]: Tensor(np.array(z[k]), requires_grad=True, name=k[len("param/") :])
            for k in z.files
            if k.startswith("param/")
        }
    cfg = ModelConfig(**header["model"])
    return TempModel(cfg, params), header["meta"]

