"""Analytic Hamiltonians H(t, x, u, p) and their level-set extensions.

The objects here are plain data: an evaluable Hamiltonian together with its
declared periods, Lipschitz constants and (optional) transport structure
``H = b(t,x,u) + a(t,x)|p|``.  The transport structure is what the Godunov
flux and the fast kernels consume, so builtins carry exact coefficient
callbacks and bounds.

Conventions
-----------
* ``fn(t, x, u, p)`` must broadcast: ``x`` and ``p`` have the spatial
  dimension on the last axis, ``t`` and ``u`` are scalars or arrays of the
  batch shape.
* transport coefficient callbacks take unpacked coordinates:
  ``a(t, x1, .., xN)`` and ``b(t, x1, .., xN, u)``; they must accept scalars
  (for the compiled kernels) and numpy arrays (for the vectorized path).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


class NumericalLimitUnstable(ValueError):
    """Raised when the small-scale limit defining the recession function
    does not settle at the rate its gradient bound implies."""


@dataclass(frozen=True)
class TransportForm:
    """Structure tag for H(t,x,u,p) = b(t,x,u) + a(t,x)|p|."""

    a: Callable
    b: Callable
    inf_a: float
    sup_a: float
    sup_abs_b: float


@dataclass(frozen=True)
class AnalyticHamiltonian:
    dim: int
    fn: Callable
    time_period: float = 1.0
    x_period: tuple = (1.0,)
    u_period: float = 1.0
    lip_C1: Optional[float] = None
    geom_C: Optional[float] = None
    structure: Optional[TransportForm] = None
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if len(self.x_period) != self.dim:
            raise ValueError("x_period must have one entry per axis")
        if self.u_period <= 0:
            raise ValueError("u_period must be positive")

    def __call__(self, t, x, u, p):
        return self.fn(t, x, u, p)


@dataclass(frozen=True)
class LevelSetHamiltonian:
    """One-homogeneous extension F(t,x,y,p_x,p_y) of a Hamiltonian.

    F equals |p_y| * H(t, x, y, p_x/|p_y|) away from p_y = 0 and the
    recession function of H on p_y = 0; it vanishes at (p_x,p_y) = (0,0).
    """

    base: AnalyticHamiltonian
    coercivity_C2: float

    def __call__(self, t, x, y, px, py):
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        if py.ndim == 0 and px.ndim <= 1:
            if py != 0.0:
                apy = abs(float(py))
                return apy * float(self.base(t, x, y, px / apy))
            return float(self.recession(t, x, y, px))
        py = np.broadcast_to(py, px.shape[:-1])
        apy = np.abs(py)
        safe = np.where(apy > 0, apy, 1.0)
        scaled = px / safe[..., None]
        vals = apy * np.asarray(self.base(t, x, y, scaled), dtype=float)
        rec = np.asarray(self.recession(t, x, y, px), dtype=float)
        return np.where(apy > 0, vals, np.broadcast_to(rec, vals.shape))

    def recession(self, t, x, y, px):
        return recession(self.base, t, x, y, px)


def recession(H: AnalyticHamiltonian, t, x, u, p):
    """Gradient-homogeneous part lim_{s->0+} s*H(t, x, u, p/s).

    Transport-form Hamiltonians get the closed form a(t,x)|p|; otherwise a
    three-point numerical limit is used and cross-checked at the linear rate
    implied by the bound |s*H(.,p/s) - limit| <= geom_C*s.
    """
    p = np.asarray(p, dtype=float)
    if H.structure is not None:
        x = np.asarray(x, dtype=float)
        coords = [x[..., k] for k in range(H.dim)] if x.ndim else [x]
        a = H.structure.a(t, *coords)
        return a * np.sqrt(np.sum(p * p, axis=-1))

    s_values = (1e-4, 1e-5, 1e-6)
    vals = [s * np.asarray(H(t, x, u, p / s), dtype=float) for s in s_values]
    tol_c = H.geom_C if H.geom_C is not None else max(1.0, float(np.max(np.abs(vals[-1]))))
    for k in range(len(s_values) - 1):
        gap = np.max(np.abs(vals[k] - vals[k + 1]))
        allowed = 2.0 * tol_c * (s_values[k] + s_values[k + 1]) + 1e-9
        if gap > allowed:
            raise NumericalLimitUnstable(
                f"s*H(., p/s) moved by {gap:.3e} between s={s_values[k]:g} and "
                f"s={s_values[k + 1]:g}; allowed {allowed:.3e}"
            )
    # one Richardson step on the two finest evaluations (error is O(s))
    s1, s2 = s_values[-2], s_values[-1]
    return vals[-1] + (vals[-1] - vals[-2]) * (s2 / (s1 - s2))


def extend_levelset(H: AnalyticHamiltonian, coercivity_C2: Optional[float] = None,
                    seed: int = 0) -> LevelSetHamiltonian:
    """Build the level-set extension of ``H``.

    ``coercivity_C2`` defaults to inf(a) for transport Hamiltonians and to a
    sampled lower bound of F(.,p_x,0)/|p_x| otherwise.
    """
    if H.lip_C1 is None:
        raise ValueError("extend_levelset requires lip_C1 (the recession limit "
                         "is only guaranteed for gradient-Lipschitz Hamiltonians)")
    if coercivity_C2 is None:
        if H.structure is not None:
            coercivity_C2 = H.structure.inf_a
        else:
            rng = np.random.default_rng(seed)
            n = 256
            x = rng.uniform(0.0, 1.0, size=(n, H.dim)) * np.asarray(H.x_period)
            y = rng.uniform(0.0, H.u_period, size=n)
            t = rng.uniform(0.0, H.time_period, size=n)
            d = rng.normal(size=(n, H.dim))
            d /= np.linalg.norm(d, axis=-1, keepdims=True)
            vals = np.array([recession(H, t[i], x[i], y[i], d[i]) for i in range(n)])
            coercivity_C2 = float(np.min(vals))
    if coercivity_C2 <= 0:
        raise ValueError(f"coercivity constant must be positive, got {coercivity_C2}")
    return LevelSetHamiltonian(base=H, coercivity_C2=coercivity_C2)


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------

def _case1_a(t, x):
    return 1.0 - np.cos(3.0 * TWO_PI * x) / 2.0


def _case1_b(t, x, u):
    return 2.0 * np.cos(TWO_PI * x) + np.sin(4.0 * TWO_PI * u)


def _case1_fn(t, x, u, p):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    x0 = x[..., 0] if x.ndim else x
    p0 = p[..., 0] if p.ndim else p
    return _case1_b(t, x0, u) + _case1_a(t, x0) * np.abs(p0)


def _case2_a(t, x1, x2):
    return 1.0 - np.cos(TWO_PI * x1) / 2.0 - np.sin(TWO_PI * x2) / 4.0


def _case2_b(t, x1, x2, u):
    return (np.cos(TWO_PI * x1) + np.cos(TWO_PI * x2)
            + np.cos(TWO_PI * (x1 - x2)) + np.sin(TWO_PI * u))


def _case2_fn(t, x, u, p):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    norm = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)
    return _case2_b(t, x1, x2, u) + _case2_a(t, x1, x2) * norm


def _one(t, *coords):
    return 1.0 + 0.0 * np.asarray(coords[0], dtype=float)


def _zero_b(t, *coords_u):
    return 0.0 * np.asarray(coords_u[0], dtype=float)


def _abs_fn(t, x, u, p):
    p = np.asarray(p, dtype=float)
    p0 = p[..., 0] if p.ndim else p
    return np.abs(p0)


FIRST_CASE = AnalyticHamiltonian(
    dim=1,
    fn=_case1_fn,
    x_period=(1.0,),
    u_period=0.25,
    lip_C1=4.0 * TWO_PI,
    geom_C=3.0,
    structure=TransportForm(a=_case1_a, b=_case1_b, inf_a=0.5, sup_a=1.5, sup_abs_b=3.0),
    name="first_case",
)

SECOND_CASE = AnalyticHamiltonian(
    dim=2,
    fn=_case2_fn,
    x_period=(1.0, 1.0),
    u_period=1.0,
    lip_C1=2.0 * TWO_PI,
    geom_C=4.0,
    structure=TransportForm(a=_case2_a, b=_case2_b, inf_a=0.25, sup_a=1.75, sup_abs_b=4.0),
    name="second_case",
)

STATE_FREE_ABS = AnalyticHamiltonian(
    dim=1,
    fn=_abs_fn,
    x_period=(1.0,),
    u_period=1.0,
    lip_C1=1.0,
    geom_C=0.0,
    structure=TransportForm(a=_one, b=_zero_b, inf_a=1.0, sup_a=1.0, sup_abs_b=0.0),
    name="state_free_abs",
)

_BUILTINS = {
    "first_case": FIRST_CASE,
    "second_case": SECOND_CASE,
    "state_free_abs": STATE_FREE_ABS,
}


def builtin(name: str) -> AnalyticHamiltonian:
    """Look up a Hamiltonian by its CLI tag."""
    try:
        return _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown Hamiltonian {name!r}; known: {sorted(_BUILTINS)}") from None


def transport_hamiltonian(a, b, dim=1, inf_a=None, sup_a=None, sup_abs_b=None,
                          u_period=1.0, lip_C1=None, geom_C=None,
                          x_period=None, name="transport", samples=4096, seed=0):
    """Assemble H = b(t,x,u) + a(t,x)|p| from user coefficient callbacks.

    Coefficient bounds missing from the caller are estimated by sampling the
    periodic cell (documented constants beat sampled ones; builtins carry
    exact values).
    """
    x_period = tuple(x_period) if x_period is not None else (1.0,) * dim
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, size=samples)
    xs = [rng.uniform(0.0, x_period[k], size=samples) for k in range(dim)]
    u = rng.uniform(0.0, u_period, size=samples)
    a_vals = np.asarray(a(t, *xs), dtype=float) + np.zeros(samples)
    b_vals = np.asarray(b(t, *xs, u), dtype=float) + np.zeros(samples)
    inf_a = float(np.min(a_vals)) if inf_a is None else inf_a
    sup_a = float(np.max(a_vals)) if sup_a is None else sup_a
    sup_abs_b = float(np.max(np.abs(b_vals))) if sup_abs_b is None else sup_abs_b
    if geom_C is None:
        geom_C = sup_abs_b  # |D_p H . p - H| = |b| for transport form

    def fn(tt, x, uu, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        coords = [x[..., k] for k in range(dim)] if x.ndim else [x]
        norm = np.sqrt(np.sum(p * p, axis=-1)) if p.ndim else np.abs(p)
        return b(tt, *coords, uu) + a(tt, *coords) * norm

    return AnalyticHamiltonian(
        dim=dim, fn=fn, x_period=x_period, u_period=u_period,
        lip_C1=lip_C1, geom_C=geom_C,
        structure=TransportForm(a=a, b=b, inf_a=inf_a, sup_a=sup_a, sup_abs_b=sup_abs_b),
        name=name,
    )


def state_free(H0, dim=1, lip_C1=None, geom_C=None, name="state_free"):
    """Wrap a gradient-only Hamiltonian H0(p)."""

    def fn(t, x, u, p):
        return H0(np.asarray(p, dtype=float))

    return AnalyticHamiltonian(dim=dim, fn=fn, x_period=(1.0,) * dim,
                               lip_C1=lip_C1, geom_C=geom_C, name=name)


# ---------------------------------------------------------------------------
# assumption spot checks
# ---------------------------------------------------------------------------

@dataclass
class AssumptionCheck:
    name: str
    passed: Optional[bool]
    observed: float
    bound: Optional[float]
    note: str = ""


@dataclass
class AssumptionReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = {True: "pass", False: "FAIL", None: "n/a "}[c.passed]
            bound = "-" if c.bound is None else f"{c.bound:.4g}"
            lines.append(f"{c.name:12s} {status}  observed={c.observed:.4g}  bound={bound}  {c.note}")
        return "\n".join(lines)


def check_assumptions(H: AnalyticHamiltonian, samples: int = 1000, seed: int = 0) -> AssumptionReport:
    """Monte-Carlo spot check of periodicity, Lipschitz bounds, coercivity and
    the geometric bound |D_p H . p - H|.  Report-only; nothing is proved."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = samples
    dim = H.dim
    t = rng.uniform(-1.0, 1.0, size=n) * H.time_period
    x = rng.uniform(-1.0, 1.0, size=(n, dim)) * np.asarray(H.x_period)
    u = rng.uniform(-1.0, 1.0, size=n) * H.u_period
    p = rng.normal(scale=2.0, size=(n, dim))

    base = np.asarray(H(t, x, u, p), dtype=float)
    checks = []

    # (periodicity) in t, each x axis, and u
    per = abs(np.asarray(H(t + H.time_period, x, u, p)) - base).max()
    for k in range(dim):
        shift = np.zeros(dim)
        shift[k] = H.x_period[k]
        per = max(per, abs(np.asarray(H(t, x + shift, u, p)) - base).max())
    per = max(per, abs(np.asarray(H(t, x, u + H.u_period, p)) - base).max())
    scale = max(1.0, float(np.max(np.abs(base))))
    checks.append(AssumptionCheck("periodicity", bool(per <= 1e-10 * scale), float(per), 1e-10 * scale))

    # (gradient bounds) central differences
    eps = 1e-6
    fd_tol = 1e-3

    def fd(args_plus, args_minus):
        return (np.asarray(H(*args_plus), dtype=float) - np.asarray(H(*args_minus), dtype=float)) / (2 * eps)

    dp = np.zeros((n, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = eps
        dp[:, k] = fd((t, x, u, p + e), (t, x, u, p - e))
    dp_norm = np.linalg.norm(dp, axis=1)
    du = fd((t, x, u + eps, p), (t, x, u - eps, p))
    dtx = np.abs(fd((t + eps, x, u, p), (t - eps, x, u, p)))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = eps
        dtx = np.maximum(dtx, np.abs(fd((t, x + e, u, p), (t, x - e, u, p))))
    p_norm = np.linalg.norm(p, axis=1)
    lip_obs = max(float(dp_norm.max()), float(np.abs(du).max()),
                  float((dtx / (1.0 + p_norm)).max()))
    lip_ok = None if H.lip_C1 is None else bool(lip_obs <= H.lip_C1 + fd_tol)
    checks.append(AssumptionCheck("lipschitz", lip_ok, lip_obs, H.lip_C1))

    # (coercivity) H at |p| = R must grow with R, uniformly over sampled states
    radii = (4.0, 8.0, 16.0)
    dirs = rng.normal(size=(n, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    mins = [float(np.min(np.asarray(H(t, x, u, R * dirs), dtype=float))) for R in radii]
    coercive = bool(mins[2] > mins[0] + 0.5 * (radii[2] - radii[0]) * 1e-3)
    checks.append(AssumptionCheck("coercivity", coercive, mins[2] - mins[0], None,
                                  note=f"min H at R={radii}: {[f'{m:.3g}' for m in mins]}"))

    # (geometric bound) |D_p H . p - H|, also probed at large |p| to spot
    # unbounded growth even when no constant was declared
    geo = np.abs(np.sum(dp * p, axis=1) - base)
    geo_obs = float(geo.max())
    geo_large = []
    for R in radii:
        pR = R * dirs
        dpR = np.zeros((n, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = eps * max(1.0, R)
            dpR[:, k] = (np.asarray(H(t, x, u, pR + e)) - np.asarray(H(t, x, u, pR - e))) / (2 * eps * max(1.0, R))
        geo_large.append(float(np.abs(np.sum(dpR * pR, axis=1) - np.asarray(H(t, x, u, pR))).max()))
    geo_obs = max(geo_obs, max(geo_large))
    if H.geom_C is not None:
        geo_ok = bool(geo_obs <= H.geom_C + fd_tol * (1 + radii[-1]))
    else:
        # bounded if it does not keep growing with the sampling radius
        geo_ok = bool(geo_large[2] <= 2.0 * geo_large[0] + 1.0)
    checks.append(AssumptionCheck("geom_bound", geo_ok, geo_obs, H.geom_C))

    return AssumptionReport(checks=checks)


def replace(H: AnalyticHamiltonian, **kw) -> AnalyticHamiltonian:
    return dataclasses.replace(H, **kw)
