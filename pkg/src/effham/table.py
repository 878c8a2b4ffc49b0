"""Tabulated effective Hamiltonians with piecewise-linear interpolation.

A table stores sampled values on a finite slope set together with simplicial
connectivity (segments in 1D, triangles in 2D) and per-vertex provenance.
Interpolation is barycentric on the containing simplex; queries outside the
hull raise :class:`OutOfHull`.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cellproblems as cp
from .grids import PeriodicGrid, TimeGrid
from .hamiltonians import AnalyticHamiltonian

PROVENANCE_KEYS = ("method", "nx", "ny", "dt", "alpha", "tau", "residual", "error_bar")


class OutOfHull(ValueError):
    def __init__(self, p, nearest_vertex, nearest_value):
        super().__init__(f"slope {p} lies outside the table hull; nearest vertex "
                         f"{nearest_vertex} (value {nearest_value})")
        self.p = p
        self.nearest_vertex = nearest_vertex
        self.nearest_value = nearest_value


@dataclass
class EffHamTable:
    dim: int
    vertices: np.ndarray       # (M, dim)
    values: np.ndarray         # (M,)
    simplices: np.ndarray      # (K, dim+1) vertex indices
    provenance: list = field(default_factory=list)
    partial: bool = False

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, self.dim)
        self.values = np.asarray(self.values, dtype=float)
        self.simplices = np.asarray(self.simplices, dtype=int).reshape(-1, self.dim + 1)
        self.validate()

    def validate(self):
        m = len(self.vertices)
        if len(self.values) != m:
            raise ValueError("one value per vertex required")
        uniq = {tuple(v) for v in np.round(self.vertices, 14)}
        if len(uniq) != m:
            raise ValueError("vertices must be distinct")
        if not self.partial:
            if not np.isfinite(self.values).all():
                raise ValueError("table values must be finite")
            for rec in self.provenance:
                eb = rec.get("error_bar")
                if eb is None or not np.isfinite(eb):
                    raise ValueError("every vertex needs a finite error bar")
        if self.simplices.size and (self.simplices.min() < 0 or self.simplices.max() >= m):
            raise ValueError("simplex indices out of range")

    @property
    def hull_bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def error_bars(self) -> np.ndarray:
        return np.array([rec.get("error_bar", np.nan) if rec else np.nan
                         for rec in self.provenance]) if self.provenance else \
            np.full(len(self.values), np.nan)


def _segments_1d(vertices) -> np.ndarray:
    order = np.argsort(vertices[:, 0], kind="stable")
    return np.stack([order[:-1], order[1:]], axis=1)


def make_table(vertices, values, dim=None, provenance=None, partial=False) -> EffHamTable:
    """Assemble a table, building the connectivity (sorted segments in 1D,
    Delaunay triangles in 2D)."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim == 1:
        vertices = vertices[:, None]
    dim = dim or vertices.shape[1]
    if dim == 1:
        simplices = _segments_1d(vertices)
    elif dim == 2:
        from scipy.spatial import Delaunay

        simplices = Delaunay(vertices).simplices
        simplices = np.sort(simplices, axis=1)
        simplices = simplices[np.lexsort(simplices.T[::-1])]
    else:
        raise ValueError("tables support dim 1 and 2")
    if provenance is None:
        provenance = [{"method": "direct", "error_bar": 0.0} for _ in values]
    return EffHamTable(dim=dim, vertices=vertices, values=np.asarray(values, float),
                       simplices=simplices, provenance=list(provenance), partial=partial)


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def _barycentric(table, p):
    """(simplex index, weights) for the lexicographically-smallest containing
    simplex, or None."""
    verts = table.vertices
    tol = 1e-12
    for si, simplex in enumerate(table.simplices):
        pts = verts[simplex]
        A = (pts[1:] - pts[0]).T  # (dim, dim)
        try:
            lam_rest = np.linalg.solve(A, np.asarray(p, float) - pts[0])
        except np.linalg.LinAlgError:
            continue
        lam0 = 1.0 - lam_rest.sum()
        lam = np.concatenate([[lam0], lam_rest])
        scale = max(1.0, float(np.abs(pts).max()))
        if np.all(lam >= -tol * scale):
            return si, np.clip(lam, 0.0, 1.0)
    return None


def interpolate(table: EffHamTable, p) -> float:
    """Piecewise-linear value at p: exact at vertices, continuous across
    shared faces (ties resolve to the lexicographically-smallest simplex)."""
    if table.partial:
        raise ValueError("cannot interpolate a partial table")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.size != table.dim:
        raise ValueError(f"query point must have {table.dim} components")
    if table.dim == 1:
        order = np.argsort(table.vertices[:, 0], kind="stable")
        xs = table.vertices[order, 0]
        vs = table.values[order]
        x = float(p[0])
        if x < xs[0] - 1e-14 or x > xs[-1] + 1e-14:
            j = int(np.abs(xs - x).argmin())
            raise OutOfHull(x, xs[j], vs[j])
        return float(np.interp(x, xs, vs))
    hit = _barycentric(table, p)
    if hit is None:
        d = np.linalg.norm(table.vertices - p, axis=1)
        j = int(d.argmin())
        raise OutOfHull(tuple(p), tuple(table.vertices[j]), float(table.values[j]))
    si, lam = hit
    return float(lam @ table.values[table.simplices[si]])


def interpolate_many(table: EffHamTable, ps) -> np.ndarray:
    ps = np.asarray(ps, dtype=float)
    if table.dim == 1 and ps.ndim == 1:
        order = np.argsort(table.vertices[:, 0], kind="stable")
        xs = table.vertices[order, 0]
        lo, hi = xs[0], xs[-1]
        if ps.min() < lo - 1e-14 or ps.max() > hi + 1e-14:
            bad = float(ps[np.argmax(np.maximum(lo - ps, ps - hi))])
            j = int(np.abs(xs - bad).argmin())
            raise OutOfHull(bad, xs[j], float(table.values[order][j]))
        return np.interp(ps, xs, table.values[order])
    return np.array([interpolate(table, p) for p in np.atleast_2d(ps)])


# ---------------------------------------------------------------------------
# tabulation
# ---------------------------------------------------------------------------

def _solve_vertex(H, p, method, opts):
    if method == "imbert_monneau":
        sol = cp.solve_imbert_monneau(
            H, tuple(p) if len(p) > 1 else p[0],
            nodes_per_unit=opts.get("nodes_per_unit", 400),
            dt=opts.get("dt"), scheme=opts.get("scheme", "explicit_euler"),
            tau_max=opts.get("tau_max", 60.0), tol=opts.get("tol", 1e-3),
            stat=opts.get("stat", "median"), window=opts.get("window", 5.0),
            stop_early=opts.get("stop_early", False),
            max_period=opts.get("max_period", 1000))
        prov = {"method": method, "nx": opts.get("nodes_per_unit", 400), "ny": None,
                "dt": sol.meta["dt"], "alpha": None, "tau": sol.meta["tau_end"]}
    elif method == "barles":
        sol = cp.solve_barles(
            H, p, nx=opts.get("nx", 400), ny=opts.get("ny", 100),
            dt=opts.get("dt"), scheme=opts.get("scheme", "explicit_euler"),
            tau_max=opts.get("tau_max", 60.0), tol=opts.get("tol", 1e-3),
            stat=opts.get("stat", "median"), window=opts.get("window", 5.0),
            stop_early=opts.get("stop_early", False),
            full_y_period=opts.get("full_y_period", False))
        prov = {"method": method, "nx": opts.get("nx", 400), "ny": opts.get("ny", 100),
                "dt": sol.meta["dt"], "alpha": None, "tau": sol.meta["tau_end"]}
    elif method == "discounted":
        flux = opts.get("flux") or cp._default_flux(H)
        counts = tuple([opts.get("nx", 100)] * H.dim + [opts.get("ny", 25)])
        periods = tuple(list(H.x_period) + [H.u_period])
        grid = PeriodicGrid(counts, periods)
        dt = opts.get("dt") or cp._round_dt(0.9 * cp.cfl_bound(flux, grid))
        spec = cp.CellProblemSpec(flux=flux, P=tuple(p) + (-1.0,), grid=grid,
                                  time=TimeGrid(int(round(1.0 / dt))),
                                  alpha=opts.get("alpha", 0.01), scheme="implicit_euler")
        sol = cp.solve_discounted(spec, period_tol=opts.get("period_tol", 1e-7),
                                  max_periods=opts.get("max_periods", 2000))
        prov = {"method": method, "nx": opts.get("nx", 100), "ny": opts.get("ny", 25),
                "dt": dt, "alpha": opts.get("alpha", 0.01), "tau": None}
    else:
        raise ValueError(f"unknown method {method!r}")
    prov["residual"] = sol.residual
    prov["error_bar"] = sol.lambda_error_bar
    return sol.lambda_, prov


def tabulate(H: AnalyticHamiltonian, p_set, method: str = "imbert_monneau",
             workers: int = 1, **opts) -> EffHamTable:
    """One cell solve per slope; independent vertices may run on a thread
    pool (the hot kernels release the GIL).  The result is identical for any
    worker count."""
    ps = np.asarray(p_set, dtype=float)
    if ps.ndim == 1:
        ps = ps[:, None]
    if ps.shape[1] != H.dim:
        raise ValueError(f"slopes must have {H.dim} components")
    if len(ps) == 0:
        raise ValueError("p_set must be nonempty")
    values = np.full(len(ps), np.nan)
    provenance: list = [None] * len(ps)

    def work(i):
        try:
            val, prov = _solve_vertex(H, ps[i], method, opts)
        except (cp.SolverError, cp.IrrationalSlope, FloatingPointError) as exc:
            sol = getattr(exc, "solution", None)
            return i, (sol.lambda_ if sol is not None else np.nan), {
                "method": method, "error": str(exc), "error_bar": None,
                "residual": None, "nx": None, "ny": None, "dt": None,
                "alpha": None, "tau": None}
        return i, val, prov

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, val, prov in pool.map(work, range(len(ps))):
                values[i] = val
                provenance[i] = prov
    else:
        for i in range(len(ps)):
            i, val, prov = work(i)
            values[i] = val
            provenance[i] = prov

    partial = any("error" in (rec or {}) for rec in provenance)
    return make_table(ps, values, dim=H.dim, provenance=provenance, partial=partial)


def refined_pset(lo: float, hi: float, n: int, breakpoints=(), levels: int = 4,
                 ratio: float = 0.5) -> np.ndarray:
    """Uniform slope set plus geometric clusters around each breakpoint
    (spacing shrinking by ``ratio`` per level), mirroring point placement
    near a slope break of the effective Hamiltonian."""
    pts = list(np.linspace(lo, hi, n))
    base = (hi - lo) / max(n - 1, 1)
    for b in breakpoints:
        d = base
        for _ in range(levels):
            d *= ratio
            for cand in (b - d, b + d):
                if lo <= cand <= hi:
                    pts.append(cand)
        if lo <= b <= hi:
            pts.append(b)
    return np.unique(np.round(np.array(sorted(pts)), 12))


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class TableReport:
    max_edge_slope: float
    lipschitz_bound: float
    lipschitz_ok: bool
    coercivity_ok: Optional[bool]
    second_differences: np.ndarray
    notes: str = ""

    @property
    def passed(self) -> bool:
        return self.lipschitz_ok and self.coercivity_ok is not False


def verify_table(table: EffHamTable, F_lip: float, margin: float = 1e-6,
                 coercivity_C2: Optional[float] = None) -> TableReport:
    """Check edge slopes against the Lipschitz constant, coercivity along the
    last-coordinate-zero section when such vertices exist, and report the 1D
    second-difference profile (piecewise-linearity diagnostic)."""
    if table.partial:
        raise ValueError("verify_table needs a complete table")
    worst = 0.0
    for simplex in table.simplices:
        for i in range(len(simplex)):
            for j in range(i + 1, len(simplex)):
                a, b = simplex[i], simplex[j]
                gap = np.linalg.norm(table.vertices[a] - table.vertices[b])
                if gap > 0:
                    worst = max(worst, abs(table.values[a] - table.values[b]) / gap)
    lip_ok = worst <= F_lip + margin

    coer_ok = None
    if table.dim >= 2:
        sect = np.abs(table.vertices[:, -1]) < 1e-12
        if sect.any() and coercivity_C2 is not None:
            px = np.linalg.norm(table.vertices[sect, :-1], axis=1)
            coer_ok = bool(np.all(table.values[sect] >= coercivity_C2 * px - margin))

    second = np.array([])
    if table.dim == 1:
        order = np.argsort(table.vertices[:, 0], kind="stable")
        xs = table.vertices[order, 0]
        vs = table.values[order]
        if len(xs) >= 3:
            slopes = np.diff(vs) / np.diff(xs)
            second = np.diff(slopes)
    return TableReport(max_edge_slope=worst, lipschitz_bound=F_lip,
                       lipschitz_ok=bool(lip_ok), coercivity_ok=coer_ok,
                       second_differences=second)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save(table: EffHamTable, path):
    doc = {
        "dim": table.dim,
        "vertices": [[float(x) for x in v] for v in table.vertices],
        "values": [None if not np.isfinite(v) else float(v) for v in table.values],
        "simplices": [[int(i) for i in s] for s in table.simplices],
        "provenance": table.provenance,
        "partial": table.partial,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, allow_nan=False)
        fh.write("\n")


def load(path) -> EffHamTable:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed table file at line {exc.lineno}: "
                             f"{exc.msg}") from None
    for key in ("dim", "vertices", "values", "simplices"):
        if key not in doc:
            raise ValueError(f"{path}: missing key {key!r}")
    partial = bool(doc.get("partial", False))
    values = [np.nan if v is None else float(v) for v in doc["values"]]
    if not partial and any(not np.isfinite(v) for v in values):
        raise ValueError(f"{path}: non-finite value in a non-partial table")
    return EffHamTable(dim=int(doc["dim"]), vertices=np.array(doc["vertices"], float),
                       values=np.array(values), simplices=np.array(doc["simplices"], int),
                       provenance=doc.get("provenance", []), partial=partial)


def to_csv(table: EffHamTable, path, comments=()):
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        cols = [f"p{k + 1}" for k in range(table.dim)] + ["value", "error_bar"]
        fh.write(",".join(cols) + "\n")
        bars = table.error_bars()
        for v, val, eb in zip(table.vertices, table.values, bars):
            row = [repr(float(x)) for x in v] + [repr(float(val)), repr(float(eb))]
            fh.write(",".join(row) + "\n")
