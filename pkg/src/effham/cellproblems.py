"""Discrete cell problems and the effective-Hamiltonian constant.

Four routes to the same number:

* :func:`solve_discounted` -- implicit scheme for the discounted auxiliary
  problem on the extended periodic cell; the constant is read off as
  ``-mean(alpha * W)``.
* :func:`solve_longtime` -- long-time march of the undiscounted problem; the
  constant is the limit of ``-stat(V(tau))/tau``.
* :func:`solve_imbert_monneau` -- value-coupled cell problem on the x lattice
  (rational slopes only; the slope fixes the spatial period).
* :func:`solve_barles` -- long-time march on the extended cell
  ``[0, x_period] x [0, u_period]`` with frozen gradient ``(p, -1)``; works
  for arbitrary real slopes.

Every solver returns a :class:`CellSolution` whose ``lambda_`` field is the
effective-Hamiltonian estimate (so the scaled statistic in ``history``
converges to ``-lambda_``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import grids, kernels
from .fluxes import NumericalHamiltonian, godunov_for, lax_friedrichs
from .grids import GridFunction, PeriodicGrid, TimeGrid
from .hamiltonians import AnalyticHamiltonian, extend_levelset

log = logging.getLogger(__name__)

SCHEMES = ("explicit_euler", "implicit_euler", "rk3_weno5")

HISTORY_DTYPE = np.dtype([("tau", float), ("scaled_stat", float),
                          ("node_minus_stat", float), ("oscillation", float)])


class SolverError(RuntimeError):
    pass


class CFLViolation(ValueError):
    pass


class InnerIterationDiverged(SolverError):
    pass


class MaxPeriodsExceeded(SolverError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class NotConverged(SolverError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class IrrationalSlope(ValueError):
    pass


def cfl_bound(flux: NumericalHamiltonian, grid: PeriodicGrid) -> float:
    """Monotone step bound dt <= h_min / (2 * n_axes * C1_tilde): every axis
    contributes two one-sided slopes of Lipschitz constant at most C1_tilde."""
    return min(grid.steps) / (2.0 * grid.ndim * flux.lip_C1t)


@dataclass(frozen=True)
class CellProblemSpec:
    """Frozen description of one discrete cell problem on the extended cell."""

    flux: NumericalHamiltonian
    P: tuple
    grid: PeriodicGrid
    time: TimeGrid
    alpha: float = 0.0
    scheme: str = "explicit_euler"

    def __post_init__(self):
        object.__setattr__(self, "P", tuple(float(p) for p in self.P))
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if len(self.P) != self.grid.ndim:
            raise ValueError("P must have one entry per grid axis")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.scheme == "explicit_euler":
            bound = cfl_bound(self.flux, self.grid)
            if self.time.dt > bound * (1 + 1e-12):
                raise CFLViolation(
                    f"explicit step dt={self.time.dt:g} exceeds the monotone bound "
                    f"{bound:g}; shrink dt or use implicit_euler/rk3_weno5")


@dataclass
class CellSolution:
    """Orbit, extracted constant and diagnostics of one cell solve.

    ``W`` holds the orbit snapshots; a single entry means the orbit is
    constant in time (the case for time-independent fluxes).
    """

    W: list
    lambda_: float
    lambda_error_bar: float
    residual: float
    iterations: int
    history: np.ndarray
    converged: bool
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> GridFunction:
        return self.W[-1]


# ---------------------------------------------------------------------------
# stencil evaluation
# ---------------------------------------------------------------------------

def _transport_coeffs(flux, grid, t):
    tr = flux.transport
    nx_axes = grid.ndim - 1
    xs = [grid.axis_points(k) for k in range(nx_axes)]
    ys = grid.axis_points(nx_axes)
    xmesh = np.ix_(*xs) if nx_axes else ()
    a = np.broadcast_to(np.asarray(tr.a(t, *xmesh), dtype=float),
                        grid.counts[:-1]).copy()
    full = np.ix_(*xs, ys)
    b = np.broadcast_to(np.asarray(tr.b(t, *full), dtype=float), grid.counts).copy()
    return a, b


def _coords_xy(grid):
    nx_axes = grid.ndim - 1
    mesh = np.meshgrid(*[grid.axis_points(k) for k in range(grid.ndim)], indexing="ij")
    X = np.stack(mesh[:nx_axes], axis=-1) if nx_axes else np.zeros(grid.counts + (0,))
    Y = mesh[-1]
    return X, Y


def stencil_array(flux: NumericalHamiltonian, P, W: np.ndarray, grid: PeriodicGrid,
                  t: float = 0.0, weno: bool = False) -> np.ndarray:
    """S[W] on the whole lattice."""
    steps = grid.steps
    if flux.transport is not None:
        a, b = _transport_coeffs(flux, grid, t)
        return kernels.transport_s(W, a, b, P, steps, weno=weno)
    qs = []
    for k in range(grid.ndim):
        if weno:
            dm, dp = kernels.weno_pm(W, steps[k], k)
        else:
            dp = (np.roll(W, -1, axis=k) - W) / steps[k]
            dm = (W - np.roll(W, 1, axis=k)) / steps[k]
        qs.append(dp + P[k])
        qs.append(dm + P[k])
    q = np.stack(qs, axis=-1)
    X, Y = _coords_xy(grid)
    return np.asarray(flux.eval(t, X, Y, q), dtype=float)


def stencil_S(flux: NumericalHamiltonian, P, W: GridFunction, t: float = 0.0,
              index=None):
    """The stencil operator at one node (or everywhere for ``index=None``):
    the flux applied to the one-sided differences of W shifted by P."""
    S = stencil_array(flux, P, W.values, W.grid, t)
    if index is None:
        return GridFunction(W.grid, S)
    idx = tuple(int(i) % n for i, n in zip(np.atleast_1d(index), W.grid.counts))
    return float(S[idx])


# ---------------------------------------------------------------------------
# implicit step
# ---------------------------------------------------------------------------

def default_omega(flux, grid, dt):
    """Damping that makes the implicit fixed-point map a strict contraction."""
    return min(1.0, 0.9 * min(grid.steps) / (4.0 * grid.ndim * flux.lip_C1t * dt))


def implicit_step(flux, P, alpha, W_prev: GridFunction, t_next: float, dt: float,
                  inner_tol: float = 1e-10, max_inner: int = 400,
                  omega: Optional[float] = None) -> GridFunction:
    """One implicit step: solve (W - W_prev)/dt + alpha W + S(t, [W]) = 0 by
    damped fixed point, to a sup-norm defect of at most ``inner_tol``."""
    if inner_tol <= 0:
        raise ValueError("inner_tol must be positive")
    grid = W_prev.grid
    if omega is None:
        omega = default_omega(flux, grid, dt)
    t_stencil = t_next - dt  # the stencil is frozen at the previous time level
    prev = W_prev.values
    cur = prev.copy()
    scale = (1.0 + alpha * dt) / (omega * dt)
    defect = np.inf
    for _ in range(max_inner):
        S = stencil_array(flux, P, cur, grid, t_stencil)
        new = (1.0 - omega) * cur + omega * (prev - dt * S) / (1.0 + alpha * dt)
        defect = scale * float(np.abs(new - cur).max())
        cur = new
        if defect <= inner_tol:
            return GridFunction(grid, cur)
    raise InnerIterationDiverged(
        f"implicit step defect {defect:.3e} > {inner_tol:.3e} after {max_inner} iterations")


# ---------------------------------------------------------------------------
# discounted solve
# ---------------------------------------------------------------------------

def solve_discounted(spec: CellProblemSpec, period_tol: float = 1e-8,
                     max_periods: int = 2000, inner_tol: Optional[float] = None,
                     max_inner: int = 400, accelerate: bool = True,
                     W0: Optional[GridFunction] = None) -> CellSolution:
    """Periodic orbit of the discounted implicit scheme.

    Marches whole time periods until the sup-norm change across one period is
    at most ``period_tol``.  Adding a constant c to the state moves the
    period map by exactly c/(1+alpha dt)^{N_t}, so the constant mode of the
    error can be eliminated after every period; ``accelerate`` turns that on
    (it removes the O(1/alpha) stalling of the plain iteration and changes
    nothing about the fixed point).
    """
    if spec.alpha <= 0:
        raise ValueError("discounted solve needs alpha > 0")
    flux, grid, P = spec.flux, spec.grid, spec.P
    dt = spec.time.dt
    nt = spec.time.n_steps_per_period
    omega = default_omega(flux, grid, dt)
    if inner_tol is None:
        inner_tol = max(period_tol / 10.0, 1e-12)
    gamma = (1.0 + spec.alpha * dt) ** (-nt)

    W = np.zeros(grid.counts) if W0 is None else np.array(W0.values, dtype=float)
    time_indep = flux.transport is not None and not flux.time_dependent
    gap = np.inf
    total_inner = 0
    history = []
    converged = False
    for k in range(max_periods):
        if time_indep:
            a, b = _transport_coeffs(flux, grid, 0.0)
            Wn, worst, inner, ok = kernels.transport_implicit_period(
                W.copy(), a, b, P, grid.steps, dt, nt, spec.alpha, omega,
                inner_tol, max_inner)
            if not ok:
                raise InnerIterationDiverged(
                    f"implicit inner iteration stalled at defect {worst:.3e}")
            total_inner += inner
        else:
            Wn = W.copy()
            for n in range(nt):
                Wn = implicit_step(flux, P, spec.alpha,
                                   GridFunction(grid, Wn), (n + 1) * dt, dt,
                                   inner_tol, max_inner, omega).values
                total_inner += 1
        gap = float(np.abs(Wn - W).max())
        lam_here = -spec.alpha * grids.mean(Wn)
        history.append(((k + 1.0), -lam_here, float(Wn.flat[0] - np.median(Wn)),
                        float(Wn.max() - Wn.min())))
        if gap <= period_tol:
            W = Wn
            converged = True
            break
        if accelerate:
            W = Wn + gamma * float(np.mean(Wn - W)) / (1.0 - gamma)
        else:
            W = Wn

    Wg = GridFunction(grid, W)
    Wg.assert_finite()
    lam = -spec.alpha * grids.mean(Wg)
    orbit = [Wg]
    if not time_indep:
        orbit = _collect_orbit(spec, Wg, inner_tol, max_inner, omega)
    # the oscillation bound constant runs over space AND the time period
    osc = max(w.values.max() for w in orbit) - min(w.values.min() for w in orbit)
    residual = residual_ergodic(flux, P, lam, orbit, dt, grid=grid)
    hist = np.array(history, dtype=HISTORY_DTYPE)
    sol = CellSolution(W=orbit, lambda_=lam, lambda_error_bar=spec.alpha * osc,
                       residual=residual, iterations=total_inner, history=hist,
                       converged=converged,
                       meta={"method": "discounted", "alpha": spec.alpha,
                             "dt": dt, "grid": grid.counts, "period_gap": gap,
                             "periods": len(history), "oscillation": osc,
                             "snapshot_oscillations": [grids.oscillation(w)
                                                       for w in orbit]})
    if not converged:
        raise MaxPeriodsExceeded(
            f"period change {gap:.3e} > {period_tol:.3e} after {max_periods} periods",
            solution=sol)
    return sol


def _collect_orbit(spec, W0, inner_tol, max_inner, omega):
    orbit = [W0]
    W = W0
    for n in range(spec.time.n_steps_per_period):
        W = implicit_step(spec.flux, spec.P, spec.alpha, W, (n + 1) * spec.time.dt,
                          spec.time.dt, inner_tol, max_inner, omega)
        orbit.append(W)
    return orbit


def residual_ergodic(flux, P, lam, W_orbit, dt, grid=None, t0=0.0):
    """Sup-norm defect of the discrete ergodic equation
    (W^{n+1}-W^n)/dt + S(t_n, [W^{n+1}]) - lambda over the periodic orbit."""
    seq = [w.values if isinstance(w, GridFunction) else np.asarray(w, float)
           for w in W_orbit]
    if grid is None:
        grid = W_orbit[0].grid
    if len(seq) == 1:
        S = stencil_array(flux, P, seq[0], grid, t0)
        return float(np.abs(S - lam).max())
    worst = 0.0
    n_steps = len(seq) - 1
    for n in range(n_steps):
        S = stencil_array(flux, P, seq[n + 1], grid, t0 + n * dt)
        d = (seq[n + 1] - seq[n]) / dt + S - lam
        worst = max(worst, float(np.abs(d).max()))
    return worst


# ---------------------------------------------------------------------------
# long-time marches
# ---------------------------------------------------------------------------

_STATS = {"median": grids.median, "mean": grids.mean}


def _check_cfl(dt, bound, scheme, what):
    if scheme == "explicit_euler" and dt > bound * (1 + 1e-12):
        log.warning("%s: explicit dt=%g exceeds the monotone bound %g "
                    "(running anyway; expect trouble well above it)", what, dt, bound)


def _longtime_drive(flux, P, grid, dt, scheme, V0, tau_max, stat, window, tol,
                    record_dt, origin, stop_early, inner_tol, max_inner, label):
    """Shared march-and-record loop behind the long-time solvers."""
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    stat_fn = _STATS[stat]
    steps_per_rec = max(1, int(round(record_dt / dt)))
    record_dt = steps_per_rec * dt
    n_rec = max(1, int(round(tau_max / record_dt)))
    rk3 = scheme == "rk3_weno5"
    time_indep = flux.transport is not None and not flux.time_dependent
    omega = default_omega(flux, grid, dt)

    V = np.array(V0.values, dtype=float, copy=True)
    a = b = None
    if time_indep:
        a, b = _transport_coeffs(flux, grid, 0.0)
    history = np.zeros(n_rec, dtype=HISTORY_DTYPE)
    origin = tuple(origin) if origin is not None else (0,) * grid.ndim
    t = 0.0
    converged = False
    n_done = 0
    total_steps = 0
    for k in range(n_rec):
        if time_indep and scheme != "implicit_euler":
            V = kernels.transport_march(V, a, b, P, grid.steps, dt, steps_per_rec, rk3=rk3)
            total_steps += steps_per_rec
        elif time_indep and scheme == "implicit_euler":
            V, _, inner, ok = kernels.transport_implicit_period(
                V, a, b, P, grid.steps, dt, steps_per_rec, 0.0, omega,
                inner_tol, max_inner)
            if not ok:
                raise InnerIterationDiverged(f"{label}: implicit iteration stalled")
            total_steps += inner
        else:
            for n in range(steps_per_rec):
                if scheme == "implicit_euler":
                    V = implicit_step(flux, P, 0.0, GridFunction(grid, V),
                                      t + (n + 1) * dt, dt, inner_tol, max_inner).values
                elif rk3:
                    V = _rk3_generic(flux, P, grid, V, t + n * dt, dt)
                else:
                    V = V - dt * stencil_array(flux, P, V, grid, t + n * dt)
                total_steps += 1
        t += steps_per_rec * dt
        if not np.isfinite(V).all():
            raise FloatingPointError(
                f"{label}: non-finite values at tau={t:g} (explicit step too large?)")
        s = stat_fn(V)
        history[k] = (t, s / t, float(V[origin]) - s, float(V.max() - V.min()))
        n_done = k + 1
        if t >= window and n_done >= 2:
            recent = history[:n_done]
            mask = recent["tau"] >= t - window
            if mask.sum() >= 2:
                vals = recent["scaled_stat"][mask]
                converged = float(vals.max() - vals.min()) <= tol
                if converged and stop_early:
                    break

    hist = history[:n_done]
    lam = -float(hist["scaled_stat"][-1])
    tail = hist["scaled_stat"][hist["tau"] >= hist["tau"][-1] - window]
    err_bar = float(tail.max() - tail.min()) if len(tail) >= 2 else float("nan")
    # orbit defect: probe one more step; for an exact ergodic orbit the
    # increment cancels the stencil, so this measures the residual
    S0 = stencil_array(flux, P, V, grid, t)
    V_plus = V - dt * S0
    S1 = stencil_array(flux, P, V_plus, grid, t)
    residual = float(np.abs((V_plus - V) / dt + S1).max())
    sol = CellSolution(W=[GridFunction(grid, V)], lambda_=lam, lambda_error_bar=err_bar,
                       residual=residual, iterations=total_steps, history=hist,
                       converged=converged,
                       meta={"method": label, "dt": dt, "grid": grid.counts,
                             "scheme": scheme, "stat": stat, "tau_end": t})
    if not converged:
        raise NotConverged(
            f"{label}: scaled {stat} still varies by {err_bar:.3e} > {tol:.3e} "
            f"over the trailing window at tau={t:g}", solution=sol)
    return sol


def _rk3_generic(flux, P, grid, V, t, dt):
    def s(w, tt):
        return stencil_array(flux, P, w, grid, tt, weno=True)

    V1 = V - dt * s(V, t)
    V2 = 0.75 * V + 0.25 * (V1 - dt * s(V1, t + dt))
    return V / 3.0 + (2.0 / 3.0) * (V2 - dt * s(V2, t + 0.5 * dt))


def solve_longtime(spec: CellProblemSpec, V0: Optional[GridFunction] = None,
                   tau_max: float = 60.0, stat: str = "median",
                   window: float = 5.0, tol: float = 1e-4,
                   record_dt: float = 1.0, origin=None, stop_early: bool = True,
                   inner_tol: float = 1e-10, max_inner: int = 400) -> CellSolution:
    """Long-time approximation: march V_t + S[V] = 0 and track stat(V)/tau.

    ``lambda_`` is minus the last recorded scaled statistic.  Raises
    :class:`NotConverged` (with the partial solution attached) if the
    trailing-window variation never falls below ``tol``.
    """
    if spec.alpha != 0:
        raise ValueError("long-time solve runs the undiscounted scheme (alpha=0)")
    if V0 is None:
        V0 = grids.constant(spec.grid, 0.0)
    return _longtime_drive(spec.flux, spec.P, spec.grid, spec.time.dt, spec.scheme,
                           V0, tau_max, stat, window, tol, record_dt, origin,
                           stop_early, inner_tol, max_inner, "longtime")


def solve_barles(H: AnalyticHamiltonian, p, nx: int = 400, ny: int = 100,
                 dt: Optional[float] = None, scheme: str = "explicit_euler",
                 tau_max: float = 60.0, stat: str = "median", window: float = 5.0,
                 tol: float = 1e-4, record_dt: float = 1.0, stop_early: bool = True,
                 full_y_period: bool = False, flux: Optional[NumericalHamiltonian] = None,
                 origin=None, inner_tol: float = 1e-10, max_inner: int = 400) -> CellSolution:
    """Level-set cell problem with frozen gradient (p, -1) on
    ``[0, x_period] x [0, u_period]``; works for arbitrary real p.

    ``lambda_`` estimates the effective Hamiltonian at p.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.size != H.dim:
        raise ValueError(f"p must have {H.dim} components")
    if flux is None:
        flux = _default_flux(H)
    y_period = H.u_period if not full_y_period else 1.0
    counts = tuple([nx] * H.dim + [ny])
    periods = tuple(list(H.x_period) + [y_period])
    grid = PeriodicGrid(counts, periods)
    bound = cfl_bound(flux, grid)
    if dt is None:
        dt = _round_dt(0.9 * bound)
    _check_cfl(dt, bound, scheme, "barles")
    P = tuple(p) + (-1.0,)
    V0 = grids.constant(grid, 0.0)
    sol = _longtime_drive(flux, P, grid, dt, scheme, V0, tau_max, stat, window,
                          tol, record_dt, origin, stop_early, inner_tol, max_inner,
                          "barles")
    sol.meta["p"] = tuple(p)
    return sol


def _round_dt(dt_max, period=1.0):
    """Largest 1/integer step below dt_max (records then tile the period)."""
    return period / int(np.ceil(period / dt_max))


def _default_flux(H, kind="godunov", lf_sigma=None):
    if kind == "godunov" and H.structure is not None:
        return godunov_for(H)
    F = extend_levelset(H)
    if lf_sigma is None:
        lf_sigma = (1.1 * (H.lip_C1 or 1.0),) * (H.dim + 1)
    return lax_friedrichs(F, lf_sigma)


# ---------------------------------------------------------------------------
# value-coupled cell problem (rational slopes)
# ---------------------------------------------------------------------------

def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, tuple) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise IrrationalSlope(f"slope {x} is not finite")
        # decimal semantics: 1.3 means 13/10, not its binary expansion
        return Fraction(repr(float(x)))
    raise IrrationalSlope(f"cannot interpret {x!r} as a rational slope")


def im_period(H: AnalyticHamiltonian, p, max_period: int = 1000) -> tuple:
    """Per axis, the smallest positive integer period q_k (a multiple of the
    axis period) with p_k * q_k an integer multiple of the value period."""
    u = _as_fraction(H.u_period)
    qs = []
    p_seq = p if isinstance(p, (tuple, list, np.ndarray)) else (p,)
    if len(p_seq) != H.dim:
        raise ValueError(f"p must have {H.dim} components")
    for k, pk in enumerate(p_seq):
        L = _as_fraction(H.x_period[k])
        if L.denominator != 1:
            raise ValueError("value-coupled route needs integer axis periods")
        frac = _as_fraction(pk)
        # candidate periods are m*L; p*(m*L) lands in u*Z iff m clears the
        # denominator of p*L/u
        step = frac * L / u
        m = 1 if step == 0 else step.denominator
        q = int(L) * m
        if q > max_period:
            raise IrrationalSlope(
                f"slope {pk} needs a spatial period of {q} cells (> {max_period}); "
                "use the level-set route instead")
        qs.append(q)
    return tuple(qs)


def solve_imbert_monneau(H: AnalyticHamiltonian, p, nodes_per_unit: int = 400,
                         dt: Optional[float] = None, scheme: str = "explicit_euler",
                         tau_max: float = 60.0, stat: str = "median",
                         window: float = 5.0, tol: float = 1e-4,
                         record_dt: float = 1.0, stop_early: bool = True,
                         max_period: int = 1000, origin=None) -> CellSolution:
    """Value-coupled cell problem v_t + H(x, v + p.x, p + Dv) = 0 on the
    q-periodic lattice, with the value argument evaluated exactly.

    ``lambda_`` estimates the effective Hamiltonian at p.
    """
    p_seq = p if isinstance(p, (tuple, list, np.ndarray)) else (p,)
    qs = im_period(H, p, max_period=max_period)
    p_f = [float(_as_fraction(pk)) for pk in p_seq]
    h = 1.0 / nodes_per_unit
    counts = tuple(q * nodes_per_unit for q in qs)
    grid = PeriodicGrid(counts, tuple(float(q) for q in qs))
    if H.structure is None:
        raise ValueError("value-coupled route currently needs a transport-form "
                         "Hamiltonian (builtins are; wrap generic ones in the "
                         "level-set route)")
    tr = H.structure
    # monotone bound: the value coupling adds the u-Lipschitz constant
    lip_u = H.lip_C1 if H.lip_C1 is not None else 0.0
    bound = 1.0 / (lip_u + 2.0 * grid.ndim * tr.sup_a / h)
    if dt is None:
        dt = _round_dt(0.9 * bound)
    _check_cfl(dt, bound, scheme, "imbert_monneau")

    stat_fn = _STATS[stat]
    steps_per_rec = max(1, int(round(record_dt / dt)))
    n_rec = max(1, int(round(tau_max / (steps_per_rec * dt))))
    axes_pts = [grid.axis_points(k) for k in range(grid.ndim)]
    xmesh = np.ix_(*axes_pts)
    a_arr = np.broadcast_to(np.asarray(tr.a(0.0, *xmesh), dtype=float), counts).copy()
    rk3 = scheme == "rk3_weno5"
    if scheme == "implicit_euler":
        raise ValueError("the value-coupled route is explicit (explicit_euler "
                         "or rk3_weno5)")

    v = np.zeros(counts)
    t = 0.0
    origin = tuple(origin) if origin is not None else (0,) * grid.ndim
    history = np.zeros(n_rec, dtype=HISTORY_DTYPE)
    converged = False
    n_done = 0
    for k in range(n_rec):
        v = kernels.im_march(v, a_arr, tr.b, axes_pts, axes_pts, p_f, grid.steps,
                             dt, t, steps_per_rec, rk3=rk3)
        t += steps_per_rec * dt
        if not np.isfinite(v).all():
            raise FloatingPointError(f"imbert_monneau: non-finite values at tau={t:g}")
        s = stat_fn(v)
        history[k] = (t, s / t, float(v[origin]) - s, float(v.max() - v.min()))
        n_done = k + 1
        if t >= window and n_done >= 2:
            recent = history[:n_done]
            mask = recent["tau"] >= t - window
            vals = recent["scaled_stat"][mask]
            if mask.sum() >= 2:
                converged = float(vals.max() - vals.min()) <= tol
                if converged and stop_early:
                    break

    hist = history[:n_done]
    lam = -float(hist["scaled_stat"][-1])
    tail = hist["scaled_stat"][hist["tau"] >= hist["tau"][-1] - window]
    err_bar = float(tail.max() - tail.min()) if len(tail) >= 2 else float("nan")
    rhs0 = kernels.im_rhs(v, a_arr, tr.b, axes_pts, axes_pts, p_f, grid.steps, t)
    v_plus = v + dt * rhs0
    rhs1 = kernels.im_rhs(v_plus, a_arr, tr.b, axes_pts, axes_pts, p_f, grid.steps, t)
    residual = float(np.abs((v_plus - v) / dt - rhs1).max())
    sol = CellSolution(W=[GridFunction(grid, v)], lambda_=lam, lambda_error_bar=err_bar,
                       residual=residual, iterations=n_done * steps_per_rec,
                       history=hist, converged=converged,
                       meta={"method": "imbert_monneau", "dt": dt, "grid": counts,
                             "scheme": scheme, "stat": stat, "tau_end": t,
                             "period": qs, "p": tuple(p_f)})
    if not converged:
        raise NotConverged(
            f"imbert_monneau: scaled {stat} varies by {err_bar:.3e} > {tol:.3e} "
            f"at tau={t:g}", solution=sol)
    return sol
