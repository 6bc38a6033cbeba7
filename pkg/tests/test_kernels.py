import numpy as np
import pytest

from antic3d.model import kernels

BACKENDS = ["python"]
try:
    kernels.get_backend("cython")
    BACKENDS.append("cython")
except ImportError:
    pass


def _case(rng, L=7, B=3, D=5, H=4):
    x = rng.normal(size=(L, B, D))
    h0 = rng.normal(size=(B, H)) * 0.5
    c0 = rng.normal(size=(B, H)) * 0.5
    Wx = rng.normal(size=(D, 4 * H)) * 0.4
    Wh = rng.normal(size=(H, 4 * H)) * 0.4
    b = rng.normal(size=4 * H) * 0.1
    return x, h0, c0, Wx, Wh, b


def _reference_forward(x, h0, c0, Wx, Wh, b):
    sig = lambda z: 1 / (1 + np.exp(-z))
    H = h0.shape[1]
    h, c, hs = h0, c0, []
    for t in range(x.shape[0]):
        z = x[t] @ Wx + h @ Wh + b
        i, f, g, o = sig(z[:, :H]), sig(z[:, H : 2 * H]), np.tanh(z[:, 2 * H : 3 * H]), sig(z[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs.append(h)
    return np.array(hs)


@pytest.mark.parametrize("backend", BACKENDS)
def test_forward_matches_reference(backend):
    fwd, _ = kernels.get_backend(backend)
    args = _case(np.random.default_rng(0))
    hs, cs, gates = fwd(*args)
    assert np.allclose(hs, _reference_forward(*args), atol=1e-14)
    H = args[1].shape[1]
    assert np.all((gates[..., :H] > 0) & (gates[..., :H] < 1))


@pytest.mark.parametrize("backend", BACKENDS)
def test_backward_matches_finite_differences(backend):
    fwd, bwd = kernels.get_backend(backend)
    rng = np.random.default_rng(1)
    x, h0, c0, Wx, Wh, b = _case(rng, L=4, B=2, D=3, H=3)
    dhs = rng.normal(size=(4, 2, 3))

    def f():
        return float(np.sum(fwd(x, h0, c0, Wx, Wh, b)[0] * dhs))

    hs, cs, gates = fwd(x, h0, c0, Wx, Wh, b)
    dx, dWx, dWh, db = bwd(x, h0, c0, Wx, Wh, hs, cs, gates, dhs)
    for arr, grad in ((x, dx), (Wx, dWx), (Wh, dWh), (b, db)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + 1e-6
            up = f()
            arr[idx] = old - 1e-6
            down = f()
            arr[idx] = old
            assert grad[idx] == pytest.approx((up - down) / 2e-6, abs=1e-8)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
def test_backends_agree():
    py_f, py_b = kernels.get_backend("python")
    cy_f, cy_b = kernels.get_backend("cython")
    rng = np.random.default_rng(2)
    for L, B, D, H in [(1, 1, 3, 2), (9, 4, 6, 7), (30, 2, 12, 16)]:
        args = _case(rng, L, B, D, H)
        a, c = py_f(*args), cy_f(*args)
        for u, v in zip(a, c):
            assert np.allclose(u, v, rtol=0, atol=1e-13)
        dhs = rng.normal(size=(L, B, H))
        ga = py_b(*args[:5], *a, dhs)
        gc = cy_b(*args[:5], *c, dhs)
        for u, v in zip(ga, gc):
            assert np.allclose(u, v, rtol=0, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_selected_backend_is_known():
    assert kernels.BACKEND in ("python", "cython")
