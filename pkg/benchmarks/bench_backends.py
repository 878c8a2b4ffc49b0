"""Benchmark the numba kernels against their pure-numpy twins.

Run: python benchmarks/bench_backends.py [--nx 400] [--ny 100] [--steps 2000]
"""

import argparse
import time

import numpy as np

from effham import backend, kernels


def _case1_b(t, x, u):
    return 2.0 * np.cos(2 * np.pi * x) + np.sin(8 * np.pi * u)


def timeit(fn, *args, repeat=3, **kw):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=400)
    ap.add_argument("--ny", type=int, default=100)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()

    if not backend.NUMBA_ENABLED:
        raise SystemExit("run with the numba backend enabled (EFFHAM_BACKEND=auto)")

    nx, ny, steps = args.nx, args.ny, args.steps
    hx, hy = 1.0 / nx, 0.25 / ny
    xs = np.arange(nx) * hx
    ys = np.arange(ny) * hy
    a = 1.0 - np.cos(6 * np.pi * xs) / 2.0
    b = np.ascontiguousarray(2 * np.cos(2 * np.pi * xs)[:, None]
                             + np.sin(8 * np.pi * ys)[None, :])
    rng = np.random.default_rng(0)
    W = 0.1 * rng.normal(size=(nx, ny))
    dt = 0.9 * min(hx, hy) / 18.0
    P = (1.3, -1.0)

    rows = []

    # warm up the jit (the march kernels advance their argument in place,
    # so every timed call gets a fresh copy)
    kernels._nb_transport_march_2d(W.copy(), a, b, *P, hx, hy, dt, 2)
    t_nb, out_nb = timeit(lambda: kernels._nb_transport_march_2d(
        W.copy(), a, b, *P, hx, hy, dt, steps))
    t_np, out_np = timeit(lambda: kernels._np_transport_march(
        W.copy(), a[:, None], b, P, (hx, hy), dt, steps), repeat=1)
    assert np.allclose(out_nb, out_np, atol=1e-11)
    rows.append(("explicit march 2d", t_nb, t_np))

    n1 = nx * 5
    xs1 = np.arange(n1) * hx
    a1 = 1.0 - np.cos(6 * np.pi * xs1) / 2.0
    v = 0.05 * rng.normal(size=n1)
    jb = backend.jit_scalar(_case1_b, arity=3)
    kernels._nb_im_march_1d(v.copy(), a1, jb, xs1, xs1, 1.3, hx, dt, 0.0, 1.0, 1.0, 2)
    t_nb, o1 = timeit(lambda: kernels._nb_im_march_1d(
        v.copy(), a1, jb, xs1, xs1, 1.3, hx, dt, 0.0, 1.0, 1.0, steps))
    t_np, o2 = timeit(lambda: kernels._np_im_march(
        v.copy(), a1, _case1_b, 1.3 * xs1, (xs1,), (1.3,), (hx,), dt, 0.0,
        1.0, 1.0, steps), repeat=1)
    assert np.allclose(o1, o2, atol=1e-11)
    rows.append(("value-coupled march 1d", t_nb, t_np))

    f2 = rng.normal(size=(nx, ny))
    kernels._nb_weno_pm_2d(f2, hx, 0)
    t_nb, _ = timeit(lambda: [kernels._nb_weno_pm_2d(f2, hx, ax) for ax in (0, 1)])
    t_np, _ = timeit(lambda: [kernels._np_weno_pm(f2, hx, ax) for ax in (0, 1)])
    rows.append(("weno derivatives 2d", t_nb, t_np))

    print(f"{'kernel':28s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, t_nb, t_np in rows:
        print(f"{name:28s} {t_nb:10.3f} {t_np:10.3f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
