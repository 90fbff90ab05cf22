import os
import subprocess
import sys

import numpy as np
import pytest

from tempadapt import _kernels
from tempadapt import ndgrad as nd
from tempadapt._kernels import fallback

from _gradcheck import numeric_grad, rel_err

compiled = _kernels.compiled()
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernel not built")


@pytest.fixture(params=["python", "cython"])
def backend(request, monkeypatch):
    mod = fallback if request.param == "python" else compiled
    if mod is None:
        pytest.skip("compiled kernel not built")
    monkeypatch.setattr(_kernels, "cell_forward", mod.cell_forward)
    monkeypatch.setattr(_kernels, "cell_backward", mod.cell_backward)
    return request.param


@needs_compiled
@pytest.mark.parametrize("n, hid", [(1, 1), (7, 5), (64, 64)])
def test_compiled_matches_fallback(n, hid, rng):
    z = rng.normal(0, 3, (n, 4 * hid))
    c = rng.normal(size=(n, hid))
    a = compiled.cell_forward(z, c)
    b = fallback.cell_forward(z, c)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=0, atol=1e-15)
    dh, dc = rng.normal(size=(n, hid)), rng.normal(size=(n, hid))
    for x, y in zip(compiled.cell_backward(dh, dc, a[2], c, a[3]), fallback.cell_backward(dh, dc, b[2], c, b[3])):
        assert np.allclose(x, y, rtol=0, atol=1e-14)


@needs_compiled
def test_compiled_saturates_cleanly():
    z = np.array([[-800.0, 800.0, -800.0, 800.0]])
    h, c, acts, tc = compiled.cell_forward(z, np.zeros((1, 1)))
    assert np.all(np.isfinite(acts))
    assert np.array_equal(acts, [[0.0, 1.0, -1.0, 1.0]])


@needs_compiled
def test_compiled_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        compiled.cell_forward(np.zeros((2, 8)), np.zeros((2, 3)))


def test_lstm_grads_on_each_backend(backend, rng):
    x = nd.Tensor(rng.uniform(-2, 2, (3, 4, 2)), requires_grad=True)
    wx = nd.Tensor(rng.uniform(-0.5, 0.5, (2, 12)), requires_grad=True)
    wh = nd.Tensor(rng.uniform(-0.5, 0.5, (3, 12)), requires_grad=True)
    b = nd.Tensor(rng.uniform(-0.5, 0.5, 12), requires_grad=True)
    loss = lambda: nd.tsum(nd.lstm(x, wx, wh, b))  # noqa: E731
    loss().backward()
    for p in (x, wx, wh, b):
        assert rel_err(p.grad, numeric_grad(lambda: loss().item(), p.data)) < 1e-6


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("TEMPADAPT_PURE_PYTHON", None)
    if env_value is not None:
        env["TEMPADAPT_PURE_PYTHON"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from tempadapt import _kernels; print(_kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    return out.stdout.strip()


def test_env_var_forces_fallback():
    assert _backend_in_subprocess("1") == "python"


@needs_compiled
def test_compiled_selected_by_default():
    assert _backend_in_subprocess(None) == "cython"


@needs_compiled
def test_benchmark_script_runs():
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = subprocess.run([sys.executable, script, "--repeat", "2"], capture_output=True, text=True, check=True)
    rows = [line for line in out.stdout.splitlines() if line.startswith(("cell_", "train step"))]
    assert len(rows) == 7 and all(line.rstrip().endswith("x") for line in rows)
