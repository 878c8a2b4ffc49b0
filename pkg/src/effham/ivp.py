"""Initial-value solves: the homogenized equation with a tabulated
effective Hamiltonian, the oscillatory problem with exact fast arguments,
and the empirical rate-of-convergence experiment between them.

Affine-plus-periodic initial data u0 = p0 . x + phi(x) are evolved through
the periodic remainder w = u - p0 . x, which is exact for both equations;
the domain period must keep the fast arguments single-valued (enforced at
setup).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import grids, kernels
from .cellproblems import _as_fraction
from .grids import GridFunction, PeriodicGrid
from .hamiltonians import AnalyticHamiltonian
from .table import EffHamTable, OutOfHull, interpolate_many


class GradientOutOfHull(ValueError):
    def __init__(self, q, bounds):
        super().__init__(f"observed slope {q:.6g} leaves the table hull "
                         f"[{bounds[0]:.6g}, {bounds[1]:.6g}]")
        self.slope = q
        self.bounds = bounds


class IncompatiblePeriods(ValueError):
    pass


@dataclass(frozen=True)
class InitialData:
    """u0(x) = slope . x + periodic(x); ``periodic`` is a vectorized callable
    (or None for purely affine data) with the given periods."""

    slope: tuple
    periodic: Optional[Callable] = None
    period: tuple = (1.0,)
    label: str = "custom"

    @property
    def dim(self) -> int:
        return len(self.slope)


def affine(p0) -> InitialData:
    p0 = tuple(np.atleast_1d(np.asarray(p0, dtype=float)))
    return InitialData(slope=p0, label="affine:" + ",".join(repr(p) for p in p0))


def sinusoid(amp: float = 1.0, dim: int = 1) -> InitialData:
    def phi(*coords):
        return amp * np.sin(2.0 * np.pi * coords[0])

    return InitialData(slope=(0.0,) * dim, periodic=phi, period=(1.0,) * dim,
                       label=f"sin:{amp!r}")


def parse_u0(text: str) -> InitialData:
    """CLI form: ``affine:<p>[,<p2>]``, ``sin[:amp]`` or ``zero``."""
    kind, _, arg = text.partition(":")
    if kind == "affine":
        return affine([float(v) for v in arg.split(",")])
    if kind == "sin":
        return sinusoid(float(arg) if arg else 1.0)
    if kind == "zero":
        return InitialData(slope=(0.0,), label="zero")
    raise ValueError(f"cannot parse initial datum {text!r}")


@dataclass
class IVPResult:
    grid: PeriodicGrid
    slope: tuple
    remainder: GridFunction
    t_final: float
    dt: float
    meta: dict = field(default_factory=dict)

    def full_values(self) -> np.ndarray:
        """u on the lattice (affine part restored); multivalued across the
        periodic wrap unless the slope is zero."""
        mesh = np.ix_(*[self.grid.axis_points(k) for k in range(self.grid.ndim)])
        aff = sum(self.slope[k] * mesh[k] for k in range(self.grid.ndim))
        return self.remainder.values + aff


def _initial_remainder(u0: InitialData, grid: PeriodicGrid) -> np.ndarray:
    if u0.periodic is None:
        return np.zeros(grid.counts)
    mesh = np.ix_(*[grid.axis_points(k) for k in range(grid.ndim)])
    return np.broadcast_to(np.asarray(u0.periodic(*mesh), dtype=float), grid.counts).copy()


# ---------------------------------------------------------------------------
# homogenized problem with a tabulated Hamiltonian
# ---------------------------------------------------------------------------

def solve_homogenized(table: EffHamTable, u0: InitialData,
                      domain: Optional[PeriodicGrid] = None, T: float = 0.5,
                      dt: Optional[float] = None, sigma: Optional[float] = None,
                      nx: int = 2000) -> IVPResult:
    """Monotone Lax-Friedrichs march of u_t + Hbar(Du) = 0 using the
    piecewise-linear table; evolves the periodic remainder."""
    if table.dim != u0.dim:
        raise ValueError("table and initial data dimensions differ")
    if domain is None:
        domain = PeriodicGrid((nx,) * u0.dim, u0.period)
    if sigma is None:
        sigma = 1.1 * max(_edge_slope_bound(table), 1e-12)
    w = _initial_remainder(u0, domain)
    if table.dim == 1:
        order = np.argsort(table.vertices[:, 0], kind="stable")
        verts = table.vertices[order, 0].copy()
        vals = table.values[order].copy()
        h = domain.steps[0]
        if dt is None:
            nsteps = max(1, int(math.ceil(T * sigma / (0.5 * h))))
        else:
            nsteps = max(1, int(math.ceil(T / dt)))
        dt = T / nsteps
        w, qlo, qhi = kernels.lf_table_march_1d(w, verts, vals, float(u0.slope[0]),
                                                sigma, h, dt, nsteps)
        lo, hi = verts[0], verts[-1]
        if qlo < lo - 1e-12 or qhi > hi + 1e-12:
            raise GradientOutOfHull(qlo if qlo < lo else qhi, (lo, hi))
    else:
        h = domain.steps
        if dt is None:
            nsteps = max(1, int(math.ceil(T * sigma * sum(1.0 / hk for hk in h) / 0.5)))
        else:
            nsteps = max(1, int(math.ceil(T / dt)))
        dt = T / nsteps
        for _ in range(nsteps):
            qc = []
            visc = np.zeros_like(w)
            for k in range(domain.ndim):
                df = (np.roll(w, -1, axis=k) - w) / h[k]
                db = (w - np.roll(w, 1, axis=k)) / h[k]
                qc.append(u0.slope[k] + 0.5 * (df + db))
                visc += 0.5 * sigma * (df - db)
            pts = np.stack([q.ravel() for q in qc], axis=-1)
            try:
                hbar = interpolate_many(table, pts if table.dim > 1 else pts[:, 0])
            except OutOfHull as exc:
                raise GradientOutOfHull(float(np.atleast_1d(exc.p)[0]),
                                        tuple(table.hull_bounds[0])) from exc
            w = w - dt * (hbar.reshape(w.shape) - visc)
    gf = GridFunction(domain, w)
    gf.assert_finite()
    return IVPResult(grid=domain, slope=tuple(u0.slope), remainder=gf, t_final=T,
                     dt=dt, meta={"sigma": sigma, "kind": "homogenized"})


def _edge_slope_bound(table) -> float:
    worst = 0.0
    for simplex in table.simplices:
        for i in range(len(simplex)):
            for j in range(i + 1, len(simplex)):
                a, b = simplex[i], simplex[j]
                gap = np.linalg.norm(table.vertices[a] - table.vertices[b])
                if gap > 0:
                    worst = max(worst, abs(table.values[a] - table.values[b]) / gap)
    return worst


# ---------------------------------------------------------------------------
# oscillatory problem
# ---------------------------------------------------------------------------

def compatible_period(H: AnalyticHamiltonian, u0: InitialData, eps: float,
                      axis: int = 0, max_cells: int = 100000) -> float:
    """Smallest domain period keeping every fast argument single-valued:
    an integer multiple of eps*x_period and of the periodic part's period,
    with slope*L/(eps*u_period) an integer."""
    eps_f = _as_fraction(eps)
    e = eps_f * _as_fraction(H.x_period[axis])
    u = _as_fraction(H.u_period)
    p0 = _as_fraction(u0.slope[axis])
    base = _as_fraction(u0.period[axis]) if u0.periodic is not None else e
    m1 = (base / e).denominator
    m2 = (p0 * base / (eps_f * u)).denominator
    m = math.lcm(m1, m2)
    L = base * m
    if float(L / e) > max_cells:
        raise IncompatiblePeriods(
            f"compatible domain needs {float(L / e):g} fast cells on axis {axis}")
    return float(L)


def solve_oscillatory(H: AnalyticHamiltonian, epsilon: float, u0: InitialData,
                      domain: Optional[PeriodicGrid] = None, T: float = 0.5,
                      dt: Optional[float] = None, nodes_per_epsilon: int = 50) -> IVPResult:
    """Monotone march of the oscillatory problem with the fast arguments
    t/eps, x/eps and u/eps evaluated pointwise (no freezing)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if u0.dim != H.dim:
        raise ValueError("initial data dimension mismatch")
    if domain is None:
        periods = tuple(compatible_period(H, u0, epsilon, axis=k) for k in range(H.dim))
        counts = tuple(int(round(L * nodes_per_epsilon / epsilon)) for L in periods)
        domain = PeriodicGrid(counts, periods)
    else:
        for k in range(H.dim):
            ratio = domain.periods[k] / (epsilon * H.x_period[k])
            if abs(ratio - round(ratio)) > 1e-9:
                raise IncompatiblePeriods(
                    f"domain period {domain.periods[k]} is not a multiple of "
                    f"eps*x_period on axis {k}")
            shift = u0.slope[k] * domain.periods[k] / (epsilon * H.u_period)
            if abs(shift - round(shift)) > 1e-9:
                raise IncompatiblePeriods(
                    f"slope {u0.slope[k]} breaks the value periodicity on axis {k}")
    if max(domain.steps) > epsilon / nodes_per_epsilon * (1 + 1e-9):
        raise IncompatiblePeriods(
            f"grid step {max(domain.steps):g} too coarse for eps={epsilon:g} "
            f"(need <= eps/{nodes_per_epsilon})")

    w = _initial_remainder(u0, domain)
    if H.structure is None:
        raise ValueError("oscillatory solver needs a transport-form Hamiltonian")
    tr = H.structure
    lip_u = H.lip_C1 if H.lip_C1 is not None else 0.0
    if dt is None:
        rate = lip_u / epsilon + sum(2.0 * tr.sup_a / hk for hk in domain.steps)
        dt = 0.9 / rate
    nsteps = max(1, int(math.ceil(T / dt)))
    dt = T / nsteps

    axes_pts = [domain.axis_points(k) for k in range(domain.ndim)]
    b_pts = [pts / epsilon for pts in axes_pts]
    xmesh = np.ix_(*b_pts)
    a_arr = np.broadcast_to(np.asarray(tr.a(0.0, *xmesh), dtype=float), domain.counts).copy()
    w = kernels.im_march(w, a_arr, tr.b, axes_pts, b_pts, tuple(u0.slope),
                         domain.steps, dt, 0.0, nsteps,
                         t_scale=1.0 / epsilon, u_scale=1.0 / epsilon)
    gf = GridFunction(domain, w)
    gf.assert_finite()
    return IVPResult(grid=domain, slope=tuple(u0.slope), remainder=gf, t_final=T,
                     dt=dt, meta={"epsilon": epsilon, "kind": "oscillatory"})


# ---------------------------------------------------------------------------
# rate experiment
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    eps: np.ndarray
    h: np.ndarray
    dt: np.ndarray
    errors: np.ndarray
    pair_slopes: np.ndarray
    slope: Optional[float]
    flagged: str = ""

    def rows(self):
        out = []
        for i in range(len(self.eps)):
            ps = self.pair_slopes[i - 1] if i > 0 else float("nan")
            out.append((self.eps[i], self.h[i], self.dt[i], self.errors[i], ps))
        return out


def rate_experiment(H: AnalyticHamiltonian, table: EffHamTable, u0: InitialData,
                    eps_list, T: float = 0.5, nodes_per_epsilon: int = 50,
                    hom_nx: int = 2000) -> RateReport:
    """For each eps, solve the oscillatory and the homogenized problem on a
    shared period and record the sup-node gap at time T; fit the log-log
    slope."""
    eps_arr = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if len(eps_arr) < 3:
        raise ValueError("need at least three eps values")
    if u0.dim != 1 or table.dim != 1:
        raise ValueError("the rate experiment is implemented for one space "
                         "dimension (higher-dimensional oscillatory sweeps "
                         "exceed a desk budget)")
    errs, hs, dts = [], [], []
    for eps in eps_arr:
        osc = solve_oscillatory(H, eps, u0, T=T, nodes_per_epsilon=nodes_per_epsilon)
        hom_grid = PeriodicGrid((min(hom_nx, 4 * osc.grid.counts[0]),), osc.grid.periods)
        hom = solve_homogenized(table, u0, domain=hom_grid, T=T)
        xs = osc.grid.axis_points(0)
        hx = hom.grid.axis_points(0)
        L = hom.grid.periods[0]
        w_hom = np.interp(xs, np.append(hx, L), np.append(hom.remainder.values,
                                                          hom.remainder.values[0]))
        err = float(np.abs(osc.remainder.values - w_hom).max())
        errs.append(err)
        hs.append(osc.grid.steps[0])
        dts.append(osc.dt)
    errs = np.array(errs)
    flagged = ""
    if errs.max() < 1e-10:
        return RateReport(eps=eps_arr, h=np.array(hs), dt=np.array(dts), errors=errs,
                          pair_slopes=np.full(len(errs) - 1, np.nan), slope=None,
                          flagged="errors at scheme-noise level; slope undefined")
    pair = np.diff(np.log(errs)) / np.diff(np.log(eps_arr))
    slope = float(np.polyfit(np.log(eps_arr), np.log(errs), 1)[0])
    return RateReport(eps=eps_arr, h=np.array(hs), dt=np.array(dts), errors=errs,
                      pair_slopes=pair, slope=slope, flagged=flagged)
