"""The numba kernels and their pure-numpy twins must agree bit-for-bit-ish."""

import os
import subprocess
import sys

import numpy as np
import pytest

from effham import backend, kernels


def _case1_b(t, x, u):
    return 2.0 * np.cos(2 * np.pi * x) + np.sin(8 * np.pi * u)


def _setup_2d(nx=40, ny=12, seed=0):
    rng = np.random.default_rng(seed)
    hx, hy = 1.0 / nx, 0.25 / ny
    xs = np.arange(nx) * hx
    ys = np.arange(ny) * hy
    a = 1.0 - np.cos(6 * np.pi * xs) / 2.0
    b = 2 * np.cos(2 * np.pi * xs)[:, None] + np.sin(8 * np.pi * ys)[None, :]
    W = 0.3 * rng.normal(size=(nx, ny))
    return W, a, np.ascontiguousarray(b + 0 * W), (1.3, -1.0), (hx, hy)


needs_numba = pytest.mark.skipif(not backend.NUMBA_ENABLED,
                                 reason="numba backend disabled")


@needs_numba
class TestTwinsAgree:
    def test_transport_stencil(self):
        W, a, b, P, steps = _setup_2d()
        nb = kernels._nb_transport_s_2d(W.copy(), a, b, P[0], P[1], steps[0],
                                        steps[1], np.empty_like(W))
        np_ = kernels._np_transport_s(W, a[:, None], b, P, steps)
        assert np.allclose(nb, np_, atol=1e-13, rtol=0)

    def test_transport_stencil_weno(self):
        W, a, b, P, steps = _setup_2d()
        nb = kernels._nb_transport_s_weno_2d(W.copy(), a, b, P[0], P[1], steps[0],
                                             steps[1], np.empty_like(W))
        np_ = kernels._np_transport_s(W, a[:, None], b, P, steps, weno=True)
        assert np.allclose(nb, np_, atol=1e-12, rtol=0)

    def test_explicit_march(self):
        W, a, b, P, steps = _setup_2d()
        dt = 0.2 * min(steps) / 18.0
        nb = kernels._nb_transport_march_2d(W.copy(), a, b, P[0], P[1], steps[0],
                                            steps[1], dt, 25)
        np_ = kernels._np_transport_march(W.copy(), a[:, None], b, P, steps, dt, 25)
        assert np.allclose(nb, np_, atol=1e-12, rtol=0)

    def test_rk3_march(self):
        W, a, b, P, steps = _setup_2d()
        dt = 0.2 * min(steps) / 18.0
        nb = kernels._nb_transport_march_rk3_2d(W.copy(), a, b, P[0], P[1],
                                                steps[0], steps[1], dt, 10)
        np_ = kernels._np_transport_march(W.copy(), a[:, None], b, P, steps, dt, 10,
                                          weno_rk3=True)
        assert np.allclose(nb, np_, atol=1e-12, rtol=0)

    def test_implicit_period(self):
        W, a, b, P, steps = _setup_2d()
        dt = 0.2 * min(steps) / 18.0
        args = (P, steps, dt, 20, 0.05, 0.5, 1e-11, 300)
        nb = kernels._nb_transport_implicit_period_2d(W.copy(), a, b, P[0], P[1],
                                                      steps[0], steps[1], *args[2:])
        np_ = kernels._np_transport_implicit_period(W.copy(), a[:, None], b, *args)
        assert nb[3] and np_[3]
        assert np.allclose(nb[0], np_[0], atol=1e-11, rtol=0)

    def test_weno_pm(self):
        rng = np.random.default_rng(1)
        f = rng.normal(size=64)
        nb = kernels._nb_weno_pm_1d(f, 0.01)
        np_ = kernels._np_weno_pm(f, 0.01, 0)
        assert np.allclose(nb[0], np_[0], atol=1e-12)
        assert np.allclose(nb[1], np_[1], atol=1e-12)
        f2 = rng.normal(size=(16, 12))
        for axis in (0, 1):
            nb2 = kernels._nb_weno_pm_2d(f2, 0.05, axis)
            np2 = kernels._np_weno_pm(f2, 0.05, axis)
            assert np.allclose(nb2[0], np2[0], atol=1e-12)
            assert np.allclose(nb2[1], np2[1], atol=1e-12)

    def test_im_march(self):
        n = 50
        h = 1.0 / n
        xs = np.arange(n) * h
        a = 1.0 - np.cos(6 * np.pi * xs) / 2.0
        v0 = 0.1 * np.sin(2 * np.pi * xs)
        dt = 0.3 * h / 4.0
        jb = backend.jit_scalar(_case1_b, arity=3)
        assert jb is not None
        nb = kernels._nb_im_march_1d(v0.copy(), a, jb, xs, xs, 1.3, h, dt, 0.0,
                                     1.0, 1.0, 30)
        xsp = 1.3 * xs
        np_ = kernels._np_im_march(v0.copy(), a, _case1_b, xsp, (xs,), (1.3,), (h,),
                                   dt, 0.0, 1.0, 1.0, 30)
        assert np.allclose(nb, np_, atol=1e-12, rtol=0)

    def test_lf_table_march(self):
        verts = np.array([-3.0, -1.0, 0.0, 1.5, 3.0])
        vals = np.abs(verts)
        n = 40
        h = 1.0 / n
        w0 = 0.05 * np.sin(2 * np.pi * np.arange(n) * h)
        nb = kernels._nb_lf_table_march_1d(w0.copy(), verts, vals, 0.3, 1.2, h,
                                           0.2 * h, 20)
        np_ = kernels._np_lf_table_march_1d(w0.copy(), verts, vals, 0.3, 1.2, h,
                                            0.2 * h, 20)
        assert np.allclose(nb[0], np_[0], atol=1e-12, rtol=0)
        assert nb[1] == pytest.approx(np_[1], abs=1e-12)
        assert nb[2] == pytest.approx(np_[2], abs=1e-12)


def test_backend_env_flag():
    code = ("import effham.backend as b; print(b.NUMBA_ENABLED)")
    env = dict(os.environ, EFFHAM_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.stdout.strip() == "False"
    env = dict(os.environ, EFFHAM_BACKEND="bogus")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0


def test_dispatchers_run_on_selected_backend():
    W, a, b, P, steps = _setup_2d(16, 8)
    S = kernels.transport_s(W, a, b, P, steps)
    assert S.shape == W.shape
    dm, dp = kernels.weno_pm(np.sin(np.arange(32) * 0.1), 0.1)
    assert dm.shape == (32,)
