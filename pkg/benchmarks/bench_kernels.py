"""Compiled vs numpy LSTM cell kernels, alone and inside a full training step.

    python benchmarks/bench_kernels.py [--repeat 200]

Prints median wall time per call for each backend and the speed-up.
"""

from __future__ import annotations

import argparse
import statistics
import time
from contextlib import contextmanager

import numpy as np

from tempadapt import _kernels
from tempadapt._kernels import fallback
from tempadapt.features import ColumnScaler
from tempadapt.model import ModelConfig, TempModel
from tempadapt.train import Batch, DomainBatch, TrainConfig, total_loss


def median_time(fn, repeat: int) -> float:
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


@contextmanager
def backend(module):
    saved = _kernels.cell_forward, _kernels.cell_backward
    _kernels.cell_forward, _kernels.cell_backward = module.cell_forward, module.cell_backward
    try:
        yield
    finally:
        _kernels.cell_forward, _kernels.cell_backward = saved


def cell_cases(rng, n: int, hid: int):
    z = rng.normal(size=(n, 4 * hid))
    c_prev = rng.normal(size=(n, hid))
    h, c, acts, tanh_c = fallback.cell_forward(z, c_prev)
    dh, dc = rng.normal(size=(n, hid)), rng.normal(size=(n, hid))
    return {
        "cell_forward": lambda m: (lambda: m.cell_forward(z, c_prev)),
        "cell_backward": lambda m: (lambda: m.cell_backward(dh, dc, acts, c_prev, tanh_c)),
    }


def train_step_case(rng):
    model = TempModel.init(ModelConfig(n_dyn=13), seed=0)
    scaler = ColumnScaler(27.0, 3.0)
    cfg = TrainConfig()

    def batch(n):
        t_last = rng.uniform(22, 32, n)
        return Batch(rng.normal(size=(n, 12, 13)), rng.normal(size=(n, 4)), t_last, t_last[:, None] + rng.normal(size=(n, 24)))

    src, cal, tgt = batch(cfg.batch_size), batch(cfg.cal_batch_size), batch(cfg.domain_batch_size // 2)

    def step():
        model.zero_grad()
        total_loss(model, src, cal, DomainBatch(len(tgt), tgt), 0.005, cfg, scaler).total.backward()

    return step


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    compiled = _kernels.compiled()
    if compiled is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return 1

    rng = np.random.default_rng(0)
    rows = []
    for n, hid in ((64, 64), (192, 64), (512, 64)):
        for name, make in cell_cases(rng, n, hid).items():
            t_py = median_time(make(fallback), args.repeat)
            t_cy = median_time(make(compiled), args.repeat)
            rows.append((f"{name} n={n} h={hid}", t_py, t_cy))

    step = train_step_case(rng)
    with backend(fallback):
        t_py = median_time(step, max(5, args.repeat // 20))
    with backend(compiled):
        t_cy = median_time(step, max(5, args.repeat // 20))
    rows.append(("train step (full model, 160 windows)", t_py, t_cy))

    width = max(len(r[0]) for r in rows)
    print(f"{'case'.ljust(width)}  {'numpy ms':>9}  {'cython ms':>9}  {'speed-up':>8}")
    for name, a, b in rows:
        print(f"{name.ljust(width)}  {a * 1e3:9.3f}  {b * 1e3:9.3f}  {a / b:7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
