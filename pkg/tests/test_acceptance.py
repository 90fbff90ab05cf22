"""Acceptance gate: one test (or group of tests) per primary criterion.

A pass/fail line per criterion is printed in the "acceptance criteria"
section at the end of the pytest run.
"""

import json
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from tempadapt import ndgrad as nd
from tempadapt.data import SynthConfig, fetch_weather_archive, generate_synthetic
from tempadapt.evaluate import compute_metrics, run_ablation
from tempadapt.features import ColumnScaler
from tempadapt.model import VARIANTS, ModelConfig, TempModel
from tempadapt.pipeline import prepare
from tempadapt.solar import solar_position
from tempadapt.train import BCE_WEIGHT, Batch, DomainBatch, TrainConfig, train
from tempadapt.windows import make_windows, split_target

from conftest import ACCEPTANCE_NOTES
from _gradcheck import end_to_end_gradcheck, numeric_grad, rel_err
from test_data import FIXTURE, FakeResponse, FakeSession
from test_evaluate import naive_metrics
from test_solar import REFERENCE, SITES, _angle_diff
from test_windows import _brute_force, _frame, _synthetic_set

GRAD = "gradient correctness (all ops + 20 end-to-end params, FD h=1e-5, rel 1e-3, < 60 s)"
GRL = "gradient reversal: identity forward, -lambda * upstream backward"
EQ1 = "forecast composition y_hat = y_base*s_c + delta_ext + s_h to 1e-12"
EQ2 = "loss decomposition recomposes to the logged total within 1e-9"
WIN = "windowing matches a brute-force enumerator on 50 gap-patterned series"
SPLIT = "chronological split sizes 81/9/10 and 810/90/100 with strict ordering"
METRIC = "metrics equal a naive reference to 1e-12; RMSE >= MAE"
BENCH_A = "synthetic benchmark (a): full-model MAE < 1.5 degC on both targets"
BENCH_B = "synthetic benchmark (b): no-calibration variant worst on both targets"
BENCH_C = "synthetic benchmark (c): full model beats LSTM-only on both targets"
BENCH_T = "synthetic benchmark: 12 training runs finish in < 10 min"
SOLAR = "solar position within 1 degree of the reference calculator"
DETERMINISM = "fixed seed gives bitwise-identical history and ablation table"
REPLAY = "weather fixture replays exactly; repeat call makes no network I/O"


# --- gradients --------------------------------------------------------


def _param(rng, shape, lo=-2.0, hi=2.0):
    return nd.Tensor(rng.uniform(lo, hi, shape), requires_grad=True)


def _op_cases(rng):
    """(name, loss builder, params) for every differentiable op on the tape."""
    a, b, v = _param(rng, (4, 3)), _param(rng, (3, 2)), _param(rng, (3,))
    w = rng.normal(size=(4, 3))
    x_seq, wx, wh, bl = _param(rng, (2, 4, 3)), _param(rng, (3, 20), -0.5, 0.5), _param(rng, (5, 20), -0.5, 0.5), _param(rng, (20,), -0.5, 0.5)
    prob_logits = _param(rng, (6, 1))
    labels = rng.integers(0, 2, (6, 1)).astype(float)
    target = rng.normal(size=(4, 3))
    wsum = lambda t, weights=w: nd.tsum(nd.mul(t, weights))  # noqa: E731
    return [
        ("matmul", lambda: nd.tsum(nd.tanh(nd.matmul(a, b))), [a, b]),
        ("add", lambda: wsum(nd.tanh(nd.add(a, v))), [a, v]),
        ("sub", lambda: wsum(nd.tanh(nd.sub(a, v))), [a, v]),
        ("mul", lambda: wsum(nd.mul(a, v)), [a, v]),
        ("scale", lambda: wsum(nd.scale(a, -1.3)), [a]),
        ("sigmoid", lambda: wsum(nd.sigmoid(a)), [a]),
        ("tanh", lambda: wsum(nd.tanh(a)), [a]),
        ("activation", lambda: wsum(nd.activation(nd.activation(a, "tanh"), "elementwise-mul", v)), [a, v]),
        ("sum", lambda: nd.tsum(nd.mul(nd.tsum(a, axis=0), v)), [a, v]),
        ("mean", lambda: nd.tsum(nd.tanh(nd.mean(a, axis=1))), [a]),
        ("cumsum", lambda: wsum(nd.cumsum(a, axis=1)), [a]),
        ("reshape", lambda: nd.tsum(nd.mul(nd.reshape(a, (12,)), w.ravel())), [a]),
        ("index", lambda: nd.tsum(nd.tanh(nd.index(a, ([0, 2, 2], slice(None))))), [a]),
        ("concat", lambda: nd.tsum(nd.tanh(nd.concat([a, nd.reshape(b, (2, 3))], axis=0))), [a, b]),
        ("linear", lambda: nd.tsum(nd.tanh(nd.linear(a, b, nd.index(v, slice(0, 2))))), [a, b, v]),
        ("lstm", lambda: nd.tsum(nd.tanh(nd.lstm(x_seq, wx, wh, bl))), [x_seq, wx, wh, bl]),
        ("huber_loss", lambda: nd.huber_loss(nd.scale(a, 1.5), target), [a]),
        ("bce_loss", lambda: nd.bce_loss(nd.sigmoid(prob_logits), labels), [prob_logits]),
    ]


@pytest.mark.criterion(GRAD)
def test_gradient_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    for name, loss, params in _op_cases(rng):
        for p in params:
            p.grad = None
        loss().backward()
        for p in params:
            num = numeric_grad(lambda: loss().item(), p.data, h=1e-5)
            assert rel_err(p.grad, num) < 1e-3, name

    model = TempModel.init(ModelConfig(n_dyn=13), seed=3)
    scaler = ColumnScaler(27.0, 3.0)

    def batch(n):
        t_last = rng.uniform(22, 32, n)
        return Batch(rng.normal(size=(n, 12, 13)), rng.normal(size=(n, 4)), t_last, t_last[:, None] + rng.normal(0, 2, (n, 24)))

    src = batch(4)
    worst = end_to_end_gradcheck(model, src, batch(4), DomainBatch(2, batch(2)), 0.01, TrainConfig(), scaler, 20, rng)
    assert worst < 1e-3
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(GRL)
@pytest.mark.parametrize("lam", [0.0, 0.005, 0.01])
def test_grl_contract(lam):
    rng = np.random.default_rng(7)
    x = nd.Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    upstream = rng.normal(size=(5, 4))
    y = nd.grad_reverse(x, lam)
    assert y.data.tobytes() == x.data.tobytes()
    nd.tsum(nd.mul(y, upstream)).backward()
    assert np.array_equal(x.grad, -lam * upstream)


# --- model and loss ---------------------------------------------------


@pytest.mark.criterion(EQ1)
def test_forecast_composition():
    rng = np.random.default_rng(11)
    worst, count = 0.0, 0
    for seed in range(10):
        m = TempModel.init(ModelConfig(n_dyn=13), seed=seed)
        for p in m.params.values():  # push the branches well away from their near-identity init
            p.data *= rng.uniform(0.5, 3.0)
        x, ctx = rng.normal(size=(100, 12, 13)), rng.normal(size=(100, 4))
        out = m.forward(x, ctx, rng.uniform(15, 40, 100))
        recomposed = out.y_base.data * out.s_c.data + out.delta_ext.data + out.s_h.data
        worst = max(worst, float(np.max(np.abs(out.y_hat.data - recomposed))))
        count += len(x)
    assert count == 1000
    assert worst <= 1e-12


@pytest.mark.criterion(EQ2)
def test_loss_decomposition(small_prepared):
    p = small_prepared
    cfg = TrainConfig(epochs=2, warmup_epochs=1, hidden=16, batch_size=32, seed=0)
    _, hist = train(None, p.source_train, p.targets["nigeria_synth"], cfg, p.target_scaler, p.source_val)
    assert hist.steps
    assert any(s.calibration > 0 for s in hist.steps) and any(s.domain > 0 for s in hist.steps)
    for s in hist.steps:
        assert abs(s.total - (s.source + cfg.w_cal * s.calibration + BCE_WEIGHT * s.domain)) <= 1e-9


# --- data pipeline ----------------------------------------------------


@pytest.mark.criterion(WIN)
def test_windowing_oracle():
    rng = np.random.default_rng(50)
    for trial in range(50):
        present = {b: np.flatnonzero(rng.random(int(rng.integers(30, 160))) > rng.choice([0.0, 0.01, 0.03, 0.08])) for b in ("a", "b")}
        frame = _frame(present, rng)
        ws, ref = make_windows(frame), _brute_force(frame)
        assert len(ws) == len(ref), trial
        for i, (anchor, bid, x, ctx, t_last, y) in enumerate(ref):
            assert ws.anchors[i] == anchor and ws.building_ids[i] == bid
            assert np.array_equal(ws.X[i], x) and np.array_equal(ws.context[i], ctx)
            assert ws.t_last[i] == t_last and np.array_equal(ws.Y[i], y)


@pytest.mark.criterion(SPLIT)
@pytest.mark.parametrize("n,sizes", [(100, (81, 9, 10)), (1000, (810, 90, 100))])
def test_split_chronology(n, sizes):
    s = split_target(_synthetic_set(n))
    assert (len(s.unsup), len(s.cal), len(s.test)) == sizes
    assert s.unsup.anchors.max() < s.cal.anchors.min()
    assert s.cal.anchors.max() < s.test.anchors.min()


@pytest.mark.criterion(METRIC)
def test_metric_correctness():
    rng = np.random.default_rng(99)
    for _ in range(50):
        n = int(rng.integers(1, 20))
        obs = rng.uniform(15, 40, (n, 24))
        pred = obs + rng.normal(0, rng.uniform(0.05, 6), (n, 24))
        sc = ColumnScaler(float(rng.uniform(20, 30)), float(rng.uniform(0.5, 5)))
        r = compute_metrics(pred, obs, sc)
        for got, want in zip((r.mae, r.rmse, r.mse_scaled, r.huber_scaled), naive_metrics(pred.tolist(), obs.tolist(), sc.mean, sc.std)):
            assert abs(got - want) <= 1e-12 * max(1.0, abs(want))
        assert r.rmse >= r.mae


@pytest.mark.criterion(SOLAR)
def test_solar_position():
    per_site = {s: 0 for s in SITES}
    for site, stamp, az_ref, alt_ref in REFERENCE:
        az, alt = solar_position(pd.Timestamp(stamp), *SITES[site])
        assert _angle_diff(az, az_ref) < 1.0 and abs(alt - alt_ref) < 1.0, (site, stamp)
        per_site[site] += 1
    assert min(per_site.values()) >= 3


@pytest.mark.criterion(REPLAY)
def test_weather_fixture_replay(tmp_path):
    payload = json.loads(Path(FIXTURE).read_text())
    session = FakeSession(FakeResponse(200, payload))
    df = fetch_weather_archive(-6.17, 35.74, "2023-07-17", "2023-07-18", tmp_path, session=session)
    hour = np.arange(48) % 24
    assert len(df) == 48
    assert np.array_equal(df["air_temp_c"], 15.0 + 0.5 * hour)
    assert np.array_equal(df["dew_point_c"], 8.0 + 0.25 * hour)
    assert np.isnan(df["rel_humidity"].iloc[30]) and df["rel_humidity"].iloc[29] == 80.0 - 5
    offline = FakeSession()
    again = fetch_weather_archive(-6.17, 35.74, "2023-07-17", "2023-07-18", tmp_path, session=offline)
    assert offline.calls == [] and len(session.calls) == 1
    pd.testing.assert_frame_equal(df, again)


@pytest.mark.criterion(DETERMINISM)
def test_determinism(small_prepared):
    p = small_prepared
    cfg = TrainConfig(epochs=2, warmup_epochs=1, hidden=8, batch_size=32, seed=4)
    h1 = train(None, p.source_train, p.targets["gambia_synth"], cfg, p.target_scaler, p.source_val)[1]
    h2 = train(None, p.source_train, p.targets["gambia_synth"], cfg, p.target_scaler, p.source_val)[1]
    assert h1.to_jsonl() == h2.to_jsonl() and h1.steps_jsonl() == h2.steps_jsonl()
    t1, t2 = run_ablation(p, cfg), run_ablation(p, cfg)
    assert t1.to_json() == t2.to_json() and t1.render() == t2.render()
    for key, cell in t1.cells.items():
        assert cell.history.steps_jsonl() == t2.cells[key].history.steps_jsonl()


# --- synthetic end-to-end benchmark ----------------------------------


@pytest.fixture(scope="module")
def benchmark(request):
    """The six-variant ablation on the default synthetic domains (10 buildings, 60 days, 15 epochs)."""
    start = time.perf_counter()
    prepared = prepare(generate_synthetic(SynthConfig(seed=0)))
    table = run_ablation(prepared, TrainConfig(seed=0))
    elapsed = time.perf_counter() - start
    notes = request.config.stash[ACCEPTANCE_NOTES]
    notes.append(f"synthetic benchmark ({elapsed:.0f} s):")
    notes.extend(table.render().rstrip().splitlines())
    return table, elapsed


@pytest.mark.slow
@pytest.mark.criterion(BENCH_T)
def test_benchmark_runtime(benchmark):
    table, elapsed = benchmark
    assert len(table.cells) == 12 and not any(c.failed for c in table.cells.values())
    assert elapsed < 600


@pytest.mark.slow
@pytest.mark.criterion(BENCH_A)
@pytest.mark.parametrize("domain", ["nigeria_synth", "gambia_synth"])
def test_benchmark_full_model_accuracy(benchmark, domain):
    assert benchmark[0].mae(domain, "full") < 1.5


@pytest.mark.slow
@pytest.mark.criterion(BENCH_B)
@pytest.mark.parametrize("domain", ["nigeria_synth", "gambia_synth"])
def test_benchmark_calibration_matters_most(benchmark, domain):
    table = benchmark[0]
    maes = {v: table.mae(domain, v) for v in VARIANTS}
    assert max(maes, key=maes.get) == "no_cal", maes


@pytest.mark.slow
@pytest.mark.criterion(BENCH_C)
@pytest.mark.parametrize("domain", ["nigeria_synth", "gambia_synth"])
def test_benchmark_full_beats_lstm_only(benchmark, domain):
    table = benchmark[0]
    assert table.mae(domain, "full") < table.mae(domain, "lstm_only"), (table.mae(domain, "full"), table.mae(domain, "lstm_only"))
