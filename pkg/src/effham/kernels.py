"""Hot numerical kernels.

Every operation here exists twice with identical semantics:

* ``_nb_*`` -- scalar loops compiled with ``numba.njit`` (``nogil`` so table
  sweeps can thread);
* ``_np_*`` -- vectorized pure-numpy twins.

The public wrappers dispatch on :mod:`effham.backend`.  Coefficient
callbacks reach the numba kernels as compiled dispatchers; when a callback
cannot be jitted the wrapper silently uses the numpy twin.

Array conventions: on an (x, y) cell the x axes come first and the extra
axis is last; ``a`` arrays are sampled on the x lattice, ``b`` arrays on the
full lattice.  Gradient slots follow the flux convention (forward then
backward per axis).
"""

import numpy as np

from . import backend
from .backend import njit, jit_scalar

WENO_EPS = 1e-6


# ===========================================================================
# numba implementations
# ===========================================================================

@njit(cache=True, nogil=True, inline="always")
def _gplus(qf, qb):
    """Godunov square root for the upwind pair (forward, backward)."""
    return np.sqrt(max(-qf, 0.0) ** 2 + max(qb, 0.0) ** 2)


@njit(cache=True, nogil=True, inline="always")
def _gminus(qf, qb):
    return np.sqrt(max(qf, 0.0) ** 2 + max(-qb, 0.0) ** 2)


@njit(cache=True, nogil=True, inline="always")
def _weno_edge(v1, v2, v3, v4, v5):
    p1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0
    p2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0
    p3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0
    s1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3) ** 2
    s2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    s3 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5) ** 2 + 0.25 * (3.0 * v3 - 4.0 * v4 + v5) ** 2
    a1 = 0.1 / (WENO_EPS + s1) ** 2
    a2 = 0.6 / (WENO_EPS + s2) ** 2
    a3 = 0.3 / (WENO_EPS + s3) ** 2
    return (a1 * p1 + a2 * p2 + a3 * p3) / (a1 + a2 + a3)


@njit(cache=True, nogil=True)
def _nb_weno_pm_1d(f, h):
    n = f.shape[0]
    d = np.empty(n)
    for i in range(n):
        d[i] = (f[(i + 1) % n] - f[i]) / h
    dm = np.empty(n)
    dp = np.empty(n)
    for i in range(n):
        dm[i] = _weno_edge(d[(i - 3) % n], d[(i - 2) % n], d[(i - 1) % n],
                           d[i], d[(i + 1) % n])
        dp[i] = _weno_edge(d[(i + 2) % n], d[(i + 1) % n], d[i],
                           d[(i - 1) % n], d[(i - 2) % n])
    return dm, dp


@njit(cache=True, nogil=True)
def _nb_weno_pm_2d(f, h, axis):
    n0, n1 = f.shape
    dm = np.empty_like(f)
    dp = np.empty_like(f)
    if axis == 0:
        for j in range(n1):
            cm, cp = _nb_weno_pm_1d(np.ascontiguousarray(f[:, j]), h)
            for i in range(n0):
                dm[i, j] = cm[i]
                dp[i, j] = cp[i]
    else:
        for i in range(n0):
            cm, cp = _nb_weno_pm_1d(np.ascontiguousarray(f[i, :]), h)
            for j in range(n1):
                dm[i, j] = cm[j]
                dp[i, j] = cp[j]
    return dm, dp


@njit(cache=True, nogil=True)
def _nb_transport_s_2d(W, a, b, px, py, hx, hy, S):
    nx, ny = W.shape
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        im = i - 1 if i - 1 >= 0 else nx - 1
        ai = a[i]
        for j in range(ny):
            jp = j + 1 if j + 1 < ny else 0
            jm = j - 1 if j - 1 >= 0 else ny - 1
            q1 = (W[ip, j] - W[i, j]) / hx + px
            q2 = (W[i, j] - W[im, j]) / hx + px
            q3 = (W[i, jp] - W[i, j]) / hy + py
            q4 = (W[i, j] - W[i, jm]) / hy + py
            bij = b[i, j]
            if bij >= 0.0:
                gy = bij * _gplus(q3, q4)
            else:
                gy = bij * _gminus(q3, q4)
            S[i, j] = ai * _gplus(q1, q2) + gy
    return S


@njit(cache=True, nogil=True)
def _nb_transport_march_2d(W, a, b, px, py, hx, hy, dt, nsteps):
    S = np.empty_like(W)
    for _ in range(nsteps):
        _nb_transport_s_2d(W, a, b, px, py, hx, hy, S)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                W[i, j] -= dt * S[i, j]
    return W


@njit(cache=True, nogil=True)
def _nb_transport_s_weno_2d(W, a, b, px, py, hx, hy, S):
    dxm, dxp = _nb_weno_pm_2d(W, hx, 0)
    dym, dyp = _nb_weno_pm_2d(W, hy, 1)
    nx, ny = W.shape
    for i in range(nx):
        ai = a[i]
        for j in range(ny):
            q1 = dxp[i, j] + px
            q2 = dxm[i, j] + px
            q3 = dyp[i, j] + py
            q4 = dym[i, j] + py
            bij = b[i, j]
            if bij >= 0.0:
                gy = bij * _gplus(q3, q4)
            else:
                gy = bij * _gminus(q3, q4)
            S[i, j] = ai * _gplus(q1, q2) + gy
    return S


@njit(cache=True, nogil=True)
def _nb_transport_march_rk3_2d(W, a, b, px, py, hx, hy, dt, nsteps):
    S = np.empty_like(W)
    for _ in range(nsteps):
        _nb_transport_s_weno_2d(W, a, b, px, py, hx, hy, S)
        W1 = W - dt * S
        _nb_transport_s_weno_2d(W1, a, b, px, py, hx, hy, S)
        W2 = 0.75 * W + 0.25 * (W1 - dt * S)
        _nb_transport_s_weno_2d(W2, a, b, px, py, hx, hy, S)
        W = W / 3.0 + 2.0 / 3.0 * (W2 - dt * S)
    return W


@njit(cache=True, nogil=True)
def _nb_transport_implicit_period_2d(W, a, b, px, py, hx, hy, dt, nt, alpha,
                                     omega, inner_tol, max_inner):
    """March nt implicit steps of the discounted scheme by damped fixed point.

    Returns (W, worst defect across steps, total inner iterations, ok flag).
    """
    S = np.empty_like(W)
    worst = 0.0
    total = 0
    scale = (1.0 + alpha * dt) / (omega * dt)
    for _ in range(nt):
        Wprev = W.copy()
        cur = W
        defect = np.inf
        for _ in range(max_inner):
            _nb_transport_s_2d(cur, a, b, px, py, hx, hy, S)
            new = (1.0 - omega) * cur + omega * (Wprev - dt * S) / (1.0 + alpha * dt)
            delta = 0.0
            for i in range(new.shape[0]):
                for j in range(new.shape[1]):
                    diff = abs(new[i, j] - cur[i, j])
                    if diff > delta:
                        delta = diff
            cur = new
            total += 1
            defect = scale * delta
            if defect <= inner_tol:
                break
        if defect > worst:
            worst = defect
        if not defect <= inner_tol:
            return cur, worst, total, False
        W = cur
    return W, worst, total, True


@njit(nogil=True)
def _nb_im_march_1d(v, a, bfn, xs, xb, p, h, dt, t0, ts, us, nsteps):
    n = v.shape[0]
    buf = np.empty_like(v)
    t = t0
    for _ in range(nsteps):
        tb = t * ts
        for i in range(n):
            ip = i + 1 if i + 1 < n else 0
            im = i - 1 if i - 1 >= 0 else n - 1
            q1 = (v[ip] - v[i]) / h + p
            q2 = (v[i] - v[im]) / h + p
            u = us * (v[i] + p * xs[i])
            buf[i] = v[i] - dt * (bfn(tb, xb[i], u) + a[i] * _gplus(q1, q2))
        v, buf = buf, v
        t += dt
    return v


@njit(nogil=True)
def _nb_im_rhs_1d(v, a, bfn, xs, xb, p, h, t, ts, us, weno, out):
    n = v.shape[0]
    tb = t * ts
    if weno:
        dm, dp = _nb_weno_pm_1d(v, h)
    else:
        dm = np.empty(n)
        dp = np.empty(n)
        for i in range(n):
            ip = i + 1 if i + 1 < n else 0
            im = i - 1 if i - 1 >= 0 else n - 1
            dp[i] = (v[ip] - v[i]) / h
            dm[i] = (v[i] - v[im]) / h
    for i in range(n):
        u = us * (v[i] + p * xs[i])
        out[i] = -(bfn(tb, xb[i], u) + a[i] * _gplus(dp[i] + p, dm[i] + p))
    return out


@njit(nogil=True)
def _nb_im_march_rk3_1d(v, a, bfn, xs, xb, p, h, dt, t0, ts, us, nsteps):
    k = np.empty_like(v)
    t = t0
    for _ in range(nsteps):
        _nb_im_rhs_1d(v, a, bfn, xs, xb, p, h, t, ts, us, True, k)
        v1 = v + dt * k
        _nb_im_rhs_1d(v1, a, bfn, xs, xb, p, h, t + dt, ts, us, True, k)
        v2 = 0.75 * v + 0.25 * (v1 + dt * k)
        _nb_im_rhs_1d(v2, a, bfn, xs, xb, p, h, t + 0.5 * dt, ts, us, True, k)
        v = v / 3.0 + 2.0 / 3.0 * (v2 + dt * k)
        t += dt
    return v


@njit(nogil=True)
def _nb_im_march_2d(v, a, bfn, xs1, xs2, xb1, xb2, p1, p2, h1, h2,
                    dt, t0, ts, us, nsteps):
    n1, n2 = v.shape
    buf = np.empty_like(v)
    t = t0
    for _ in range(nsteps):
        tb = t * ts
        for i in range(n1):
            ip = i + 1 if i + 1 < n1 else 0
            im = i - 1 if i - 1 >= 0 else n1 - 1
            for j in range(n2):
                jp = j + 1 if j + 1 < n2 else 0
                jm = j - 1 if j - 1 >= 0 else n2 - 1
                q1 = (v[ip, j] - v[i, j]) / h1 + p1
                q2 = (v[i, j] - v[im, j]) / h1 + p1
                q3 = (v[i, jp] - v[i, j]) / h2 + p2
                q4 = (v[i, j] - v[i, jm]) / h2 + p2
                g = np.sqrt(max(-q1, 0.0) ** 2 + max(q2, 0.0) ** 2
                            + max(-q3, 0.0) ** 2 + max(q4, 0.0) ** 2)
                u = us * (v[i, j] + p1 * xs1[i] + p2 * xs2[j])
                buf[i, j] = v[i, j] - dt * (bfn(tb, xb1[i], xb2[j], u) + a[i, j] * g)
        v, buf = buf, v
        t += dt
    return v


@njit(nogil=True)
def _nb_im_rhs_2d(v, a, bfn, xs1, xs2, xb1, xb2, p1, p2, h1, h2, t, ts, us, weno, out):
    n1, n2 = v.shape
    tb = t * ts
    if weno:
        d1m, d1p = _nb_weno_pm_2d(v, h1, 0)
        d2m, d2p = _nb_weno_pm_2d(v, h2, 1)
    else:
        d1m = np.empty_like(v)
        d1p = np.empty_like(v)
        d2m = np.empty_like(v)
        d2p = np.empty_like(v)
        for i in range(n1):
            ip = i + 1 if i + 1 < n1 else 0
            im = i - 1 if i - 1 >= 0 else n1 - 1
            for j in range(n2):
                jp = j + 1 if j + 1 < n2 else 0
                jm = j - 1 if j - 1 >= 0 else n2 - 1
                d1p[i, j] = (v[ip, j] - v[i, j]) / h1
                d1m[i, j] = (v[i, j] - v[im, j]) / h1
                d2p[i, j] = (v[i, jp] - v[i, j]) / h2
                d2m[i, j] = (v[i, j] - v[i, jm]) / h2
    for i in range(n1):
        for j in range(n2):
            g = np.sqrt(max(-(d1p[i, j] + p1), 0.0) ** 2 + max(d1m[i, j] + p1, 0.0) ** 2
                        + max(-(d2p[i, j] + p2), 0.0) ** 2 + max(d2m[i, j] + p2, 0.0) ** 2)
            u = us * (v[i, j] + p1 * xs1[i] + p2 * xs2[j])
            out[i, j] = -(bfn(tb, xb1[i], xb2[j], u) + a[i, j] * g)
    return out


@njit(nogil=True)
def _nb_im_march_rk3_2d(v, a, bfn, xs1, xs2, xb1, xb2, p1, p2, h1, h2,
                        dt, t0, ts, us, nsteps):
    k = np.empty_like(v)
    t = t0
    for _ in range(nsteps):
        _nb_im_rhs_2d(v, a, bfn, xs1, xs2, xb1, xb2, p1, p2, h1, h2, t, ts, us, True, k)
        v1 = v + dt * k
        _nb_im_rhs_2d(v1, a, bfn, xs1, xs2, xb1, xb2, p1, p2, h1, h2, t + dt, ts, us, True, k)
        v2 = 0.75 * v + 0.25 * (v1 + dt * k)
        _nb_im_rhs_2d(v2, a, bfn, xs1, xs2, xb1, xb2, p1, p2, h1, h2, t + 0.5 * dt, ts, us, True, k)
        v = v / 3.0 + 2.0 / 3.0 * (v2 + dt * k)
        t += dt
    return v


@njit(cache=True, nogil=True)
def _nb_lf_table_march_1d(w, verts, vals, p0, sigma, h, dt, nsteps):
    n = w.shape[0]
    buf = np.empty_like(w)
    qlo = np.inf
    qhi = -np.inf
    for _ in range(nsteps):
        for i in range(n):
            ip = i + 1 if i + 1 < n else 0
            im = i - 1 if i - 1 >= 0 else n - 1
            df = (w[ip] - w[i]) / h
            db = (w[i] - w[im]) / h
            q = p0 + 0.5 * (df + db)
            if q < qlo:
                qlo = q
            if q > qhi:
                qhi = q
            hbar = np.interp(q, verts, vals)
            buf[i] = w[i] - dt * (hbar - 0.5 * sigma * (df - db))
        w, buf = buf, w
    return w, qlo, qhi


# ===========================================================================
# numpy implementations
# ===========================================================================

def _np_weno_comb(v1, v2, v3, v4, v5, eps=WENO_EPS):
    p1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0
    p2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0
    p3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0
    s1 = 13.0 / 12.0 * (v1 - 2 * v2 + v3) ** 2 + 0.25 * (v1 - 4 * v2 + 3 * v3) ** 2
    s2 = 13.0 / 12.0 * (v2 - 2 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    s3 = 13.0 / 12.0 * (v3 - 2 * v4 + v5) ** 2 + 0.25 * (3 * v3 - 4 * v4 + v5) ** 2
    a1 = 0.1 / (eps + s1) ** 2
    a2 = 0.6 / (eps + s2) ** 2
    a3 = 0.3 / (eps + s3) ** 2
    return (a1 * p1 + a2 * p2 + a3 * p3) / (a1 + a2 + a3)


def _np_weno_pm(f, h, axis, eps=WENO_EPS):
    d = (np.roll(f, -1, axis) - f) / h
    r = lambda k: np.roll(d, k, axis)
    dm = _np_weno_comb(r(3), r(2), r(1), d, r(-1), eps)
    dp = _np_weno_comb(r(-2), r(-1), d, r(1), r(2), eps)
    return dm, dp


def _np_onesided(W, axis, h):
    df = (np.roll(W, -1, axis) - W) / h
    db = (W - np.roll(W, 1, axis)) / h
    return df, db


def _np_transport_s(W, a, b, P, steps, weno=False):
    """Godunov transport stencil, any dimension; last axis is the extra one."""
    nd = W.ndim
    gx2 = np.zeros_like(W)
    for k in range(nd - 1):
        if weno:
            dm, dp = _np_weno_pm(W, steps[k], k)
        else:
            dp, dm = _np_onesided(W, k, steps[k])
        gx2 += np.maximum(-(dp + P[k]), 0.0) ** 2 + np.maximum(dm + P[k], 0.0) ** 2
    k = nd - 1
    if weno:
        dm, dp = _np_weno_pm(W, steps[k], k)
    else:
        dp, dm = _np_onesided(W, k, steps[k])
    q3 = dp + P[k]
    q4 = dm + P[k]
    gyp = np.sqrt(np.maximum(-q3, 0.0) ** 2 + np.maximum(q4, 0.0) ** 2)
    gym = np.sqrt(np.maximum(q3, 0.0) ** 2 + np.maximum(-q4, 0.0) ** 2)
    return a * np.sqrt(gx2) + np.maximum(b, 0.0) * gyp - np.maximum(-b, 0.0) * gym


def _np_transport_march(W, a, b, P, steps, dt, nsteps, weno_rk3=False):
    for _ in range(nsteps):
        if weno_rk3:
            W1 = W - dt * _np_transport_s(W, a, b, P, steps, weno=True)
            W2 = 0.75 * W + 0.25 * (W1 - dt * _np_transport_s(W1, a, b, P, steps, weno=True))
            W = W / 3.0 + 2.0 / 3.0 * (W2 - dt * _np_transport_s(W2, a, b, P, steps, weno=True))
        else:
            W = W - dt * _np_transport_s(W, a, b, P, steps)
    return W


def _np_transport_implicit_period(W, a, b, P, steps, dt, nt, alpha, omega,
                                  inner_tol, max_inner):
    worst = 0.0
    total = 0
    scale = (1.0 + alpha * dt) / (omega * dt)
    for _ in range(nt):
        Wprev = W
        cur = W
        defect = np.inf
        for _ in range(max_inner):
            S = _np_transport_s(cur, a, b, P, steps)
            new = (1.0 - omega) * cur + omega * (Wprev - dt * S) / (1.0 + alpha * dt)
            defect = scale * float(np.abs(new - cur).max())
            cur = new
            total += 1
            if defect <= inner_tol:
                break
        worst = max(worst, defect)
        if not defect <= inner_tol:
            return cur, worst, total, False
        W = cur
    return W, worst, total, True


def _np_im_rhs(v, a, bfn, xsp, xb, P, steps, t, ts, us, weno=False):
    gx2 = np.zeros_like(v)
    for k in range(v.ndim):
        if weno:
            dm, dp = _np_weno_pm(v, steps[k], k)
        else:
            dp, dm = _np_onesided(v, k, steps[k])
        gx2 += np.maximum(-(dp + P[k]), 0.0) ** 2 + np.maximum(dm + P[k], 0.0) ** 2
    u = us * (v + xsp)
    return -(np.asarray(bfn(t * ts, *xb, u), dtype=float) + a * np.sqrt(gx2))


def _np_im_march(v, a, bfn, xsp, xb, P, steps, dt, t0, ts, us, nsteps, rk3=False):
    t = t0
    for _ in range(nsteps):
        if rk3:
            v1 = v + dt * _np_im_rhs(v, a, bfn, xsp, xb, P, steps, t, ts, us, weno=True)
            v2 = 0.75 * v + 0.25 * (v1 + dt * _np_im_rhs(v1, a, bfn, xsp, xb, P, steps,
                                                         t + dt, ts, us, weno=True))
            v = v / 3.0 + 2.0 / 3.0 * (v2 + dt * _np_im_rhs(v2, a, bfn, xsp, xb, P, steps,
                                                            t + 0.5 * dt, ts, us, weno=True))
        else:
            v = v + dt * _np_im_rhs(v, a, bfn, xsp, xb, P, steps, t, ts, us)
        t += dt
    return v


def _np_lf_table_march_1d(w, verts, vals, p0, sigma, h, dt, nsteps):
    qlo, qhi = np.inf, -np.inf
    for _ in range(nsteps):
        df = (np.roll(w, -1) - w) / h
        db = (w - np.roll(w, 1)) / h
        q = p0 + 0.5 * (df + db)
        qlo = min(qlo, float(q.min()))
        qhi = max(qhi, float(q.max()))
        w = w - dt * (np.interp(q, verts, vals) - 0.5 * sigma * (df - db))
    return w, qlo, qhi


# ===========================================================================
# dispatching wrappers
# ===========================================================================

def _as_c(x):
    return np.ascontiguousarray(np.asarray(x, dtype=float))


def _own(x):
    # the march kernels advance their state argument in place; give them a
    # private copy so callers keep theirs
    return np.array(x, dtype=float, order="C", copy=True)


def transport_s(W, a, b, P, steps, weno=False):
    """Stencil array S[W] for the Godunov transport flux."""
    W = _as_c(W)
    if backend.NUMBA_ENABLED and W.ndim == 2 and not weno:
        S = np.empty_like(W)
        return _nb_transport_s_2d(W, _as_c(a).ravel(), _as_c(np.broadcast_to(b, W.shape)),
                                  P[0], P[1], steps[0], steps[1], S)
    if backend.NUMBA_ENABLED and W.ndim == 2 and weno:
        S = np.empty_like(W)
        return _nb_transport_s_weno_2d(W, _as_c(a).ravel(), _as_c(np.broadcast_to(b, W.shape)),
                                       P[0], P[1], steps[0], steps[1], S)
    aa, bb = _np_ab(W.shape, a, b)
    return _np_transport_s(W, aa, bb, tuple(P), tuple(steps), weno=weno)


def _np_ab(W_shape, a, b):
    # a lives on the x lattice (all axes but the last); pad so it broadcasts
    nd = len(W_shape)
    a = np.asarray(a, dtype=float)
    if a.ndim == nd - 1:
        a = a[..., None]
    return a, np.asarray(b, dtype=float)


def transport_march(W, a, b, P, steps, dt, nsteps, rk3=False):
    """Explicit march of W_t + S[W] = 0 (Euler/Godunov or RK3/WENO)."""
    W = _own(W)
    if backend.NUMBA_ENABLED and W.ndim == 2:
        a1 = _as_c(a).ravel()
        b2 = _as_c(np.broadcast_to(b, W.shape))
        if rk3:
            return _nb_transport_march_rk3_2d(W, a1, b2, P[0], P[1], steps[0], steps[1], dt, nsteps)
        return _nb_transport_march_2d(W, a1, b2, P[0], P[1], steps[0], steps[1], dt, nsteps)
    aa, bb = _np_ab(W.shape, a, b)
    return _np_transport_march(W, aa, bb, tuple(P), tuple(steps), dt, nsteps, weno_rk3=rk3)


def transport_implicit_period(W, a, b, P, steps, dt, nt, alpha, omega, inner_tol, max_inner):
    W = _own(W)
    if backend.NUMBA_ENABLED and W.ndim == 2:
        return _nb_transport_implicit_period_2d(
            W, _as_c(a).ravel(), _as_c(np.broadcast_to(b, W.shape)),
            P[0], P[1], steps[0], steps[1], dt, nt, alpha, omega, inner_tol, max_inner)
    aa, bb = _np_ab(W.shape, a, b)
    return _np_transport_implicit_period(W, aa, bb, tuple(P), tuple(steps), dt, nt,
                                         alpha, omega, inner_tol, max_inner)


def im_march(v, a, bfn, axes_points, b_points, P, steps, dt, t0, nsteps,
             t_scale=1.0, u_scale=1.0, rk3=False):
    """March the value-coupled problem v_t + b(t, x, u(v)) + a|Dv + P| = 0.

    ``u(v) = u_scale * (v + P . x)``; ``b_points`` are the coordinates fed to
    b (they differ from the lattice points for the oscillatory problem).
    """
    v = _own(v)
    nd = v.ndim
    if backend.NUMBA_ENABLED and nd in (1, 2):
        jb = jit_scalar(bfn, arity=nd + 2)
        if jb is not None:
            if nd == 1:
                args = (v, _as_c(a).ravel(), jb, _as_c(axes_points[0]), _as_c(b_points[0]),
                        float(P[0]), float(steps[0]), dt, t0, t_scale, u_scale, nsteps)
                return _nb_im_march_rk3_1d(*args) if rk3 else _nb_im_march_1d(*args)
            a2 = _as_c(np.broadcast_to(a, v.shape))
            args = (v, a2, jb, _as_c(axes_points[0]), _as_c(axes_points[1]),
                    _as_c(b_points[0]), _as_c(b_points[1]), float(P[0]), float(P[1]),
                    float(steps[0]), float(steps[1]), dt, t0, t_scale, u_scale, nsteps)
            return _nb_im_march_rk3_2d(*args) if rk3 else _nb_im_march_2d(*args)
    meshes = np.ix_(*axes_points)
    xsp = sum(P[k] * meshes[k] for k in range(nd)) + np.zeros(v.shape)
    xb = np.ix_(*b_points)
    aa = np.broadcast_to(np.asarray(a, float) if np.ndim(a) > 1 else
                         np.asarray(a, float).reshape((-1,) + (1,) * (nd - 1)), v.shape)
    return _np_im_march(v, aa, bfn, xsp, xb, tuple(P), tuple(steps), dt, t0,
                        t_scale, u_scale, nsteps, rk3=rk3)


def im_rhs(v, a, bfn, axes_points, b_points, P, steps, t, t_scale=1.0, u_scale=1.0, weno=False):
    """Single right-hand side evaluation of the value-coupled problem."""
    v = _as_c(v)
    nd = v.ndim
    meshes = np.ix_(*axes_points)
    xsp = sum(P[k] * meshes[k] for k in range(nd)) + np.zeros(v.shape)
    xb = np.ix_(*b_points)
    aa = np.broadcast_to(np.asarray(a, float) if np.ndim(a) > 1 else
                         np.asarray(a, float).reshape((-1,) + (1,) * (nd - 1)), v.shape)
    return _np_im_rhs(v, aa, bfn, xsp, xb, tuple(P), tuple(steps), t, t_scale, u_scale, weno=weno)


def weno_pm(values, h, axis=0):
    """Left- and right-biased fifth-order one-sided derivatives."""
    values = _as_c(values)
    if backend.NUMBA_ENABLED:
        if values.ndim == 1:
            return _nb_weno_pm_1d(values, h)
        if values.ndim == 2:
            return _nb_weno_pm_2d(values, h, axis)
    return _np_weno_pm(values, h, axis)


def lf_table_march_1d(w, verts, vals, p0, sigma, h, dt, nsteps):
    w = _own(w)
    verts = _as_c(verts)
    vals = _as_c(vals)
    if backend.NUMBA_ENABLED:
        return _nb_lf_table_march_1d(w, verts, vals, p0, sigma, h, dt, nsteps)
    return _np_lf_table_march_1d(w, verts, vals, p0, sigma, h, dt, nsteps)
