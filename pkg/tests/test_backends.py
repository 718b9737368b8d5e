"""Cross-backend agreement: the compiled kernels must reproduce the numpy
fallbacks bit for bit (finite pool, moments, fixed point) or to rounding
(SPDE, whose mesh reduction uses a different summation order)."""

import numpy as np
import pytest

from poolsim._backend import available_backends

BACKENDS = available_backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS,
                               reason="compiled extension not built")


@needs_ext
def test_finite_kernel_bit_identical():
    rng = np.random.default_rng(314)
    n, steps = 300, 80
    args = (
        rng.uniform(1, 5, n), rng.uniform(0.1, 0.4, n), rng.uniform(0.1, 1.2, n),
        rng.uniform(0, 4, n), rng.uniform(-2, 8, n), rng.uniform(0.05, 0.5, n),
        rng.normal(0, 0.05, steps), rng.standard_normal((n, steps)),
        rng.standard_exponential(n), rng.uniform(0.3, 0.8, n), 0.01,
    )
    out = {}
    for name, mod in BACKENDS.items():
        loss = np.empty(steps + 1)
        ds = np.empty(n, dtype=np.int64)
        mod.finite_pool_trial(*args, loss, ds)
        out[name] = (loss, ds)
    assert np.array_equal(out["python"][0], out["cython"][0])
    assert np.array_equal(out["python"][1], out["cython"][1])


@needs_ext
def test_moment_kernel_bit_identical():
    rng = np.random.default_rng(217)
    trials, steps, n_buckets, order = 40, 60, 3, 12
    u_init = np.stack([lam ** np.arange(order + 1, dtype=float)
                       for lam in (0.2, 0.35, 0.6)])
    args = (
        rng.uniform(1, 5, n_buckets), rng.uniform(0.1, 0.4, n_buckets),
        rng.uniform(0.2, 1.1, n_buckets), rng.uniform(0, 3, n_buckets),
        rng.uniform(-1, 4, n_buckets), np.array([0.5, 0.3, 0.2]), u_init,
        rng.normal(0, 1, (trials, steps)), rng.uniform(0.1, 0.8, (trials, steps)),
        rng.normal(0, 0.1, (trials, steps)), 0.01,
    )
    out = {}
    for name, mod in BACKENDS.items():
        u0 = np.empty((trials, steps + 1))
        u1 = np.empty((trials, steps + 1))
        cl = np.zeros(trials, dtype=np.int64)
        fl = np.zeros(trials, dtype=np.uint8)
        uf = np.empty((trials, n_buckets, order + 1))
        mod.moment_paths(*args, u0, u1, cl, fl, uf)
        out[name] = (u0, u1, cl, fl, uf)
    for i in range(5):
        assert np.array_equal(out["python"][i], out["cython"][i]), f"output {i} differs"


@needs_ext
def test_fixed_point_kernel_bit_identical():
    rng = np.random.default_rng(99)
    m, steps = 500, 70
    args = (3.5, 0.25, 0.8, 1.5, 0.3,
            rng.uniform(0, 0.6, steps + 1), rng.normal(0, 0.05, steps),
            rng.standard_normal((m, steps)), 0.01)
    out = {}
    for name, mod in BACKENDS.items():
        lam = np.empty((m, steps + 1))
        hz = np.empty((m, steps + 1))
        mod.fixed_point_inner_paths(*args, lam, hz)
        out[name] = (lam, hz)
    assert np.array_equal(out["python"][0], out["cython"][0])
    assert np.array_equal(out["python"][1], out["cython"][1])


@needs_ext
def test_fill_normals_bit_identical():
    # 100k values exercise the wedge and tail branches as well
    a = BACKENDS["python"].fill_normals(987654321, 200, 500)
    b = BACKENDS["cython"].fill_normals(987654321, 200, 500)
    assert np.array_equal(a, b)


@needs_ext
def test_spde_kernel_near_identical():
    rng = np.random.default_rng(4)
    steps, nodes = 400, 101
    mesh = np.arange(nodes) * 0.1
    v0 = np.zeros(nodes)
    v0[2] = 10.0
    args = (1.0, 4.0, 1.0, 1.5, 2.0,
            np.zeros(steps), np.ones(steps), rng.normal(0, np.sqrt(4e-6), steps),
            mesh)
    out = {}
    for name, mod in BACKENDS.items():
        v = v0.copy()
        loss = np.empty(steps + 1)
        status = mod.spde_explicit_path(*args, v, 4e-6, 0.1, 1e6, loss)
        out[name] = (status[0], v, loss)
    assert out["python"][0] == out["cython"][0] == 0
    np.testing.assert_allclose(out["python"][1], out["cython"][1], rtol=1e-12, atol=1e-18)
    np.testing.assert_allclose(out["python"][2], out["cython"][2], rtol=1e-12, atol=1e-15)


@needs_ext
def test_backend_selection_env(monkeypatch):
    from poolsim import _backend
    assert _backend._load("python").BACKEND_NAME == "python"
    assert _backend._load("cython").BACKEND_NAME == "cython"
    assert _backend._load("auto").BACKEND_NAME == "cython"
    with pytest.raises(ValueError):
        _backend._load("rust")
