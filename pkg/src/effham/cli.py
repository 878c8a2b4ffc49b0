"""Command-line front end.

Subcommands: ``cell`` (one cell solve), ``tabulate`` (effective-Hamiltonian
table over a slope set), ``rate`` (oscillatory vs homogenized convergence
experiment), ``check`` (flux/Hamiltonian property reports) and ``solve``
(homogenized initial-value problem).

Every subcommand accepts ``--config file.json`` holding the same keys as the
flags (underscores for dashes); explicit flags override the file.  Artifacts
are CSV (runs) or JSON (tables) with a provenance header; identical configs
produce byte-identical artifacts.  Exit codes: 0 success, 2 config error,
3 solver non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__, cellproblems as cp, grids, ivp
from . import table as tbl
from .fluxes import check_monotone, godunov_for, lax_friedrichs
from .grids import PeriodicGrid, TimeGrid
from .hamiltonians import builtin, check_assumptions, extend_levelset

_SCHEMES = {"euler": "explicit_euler", "explicit-euler": "explicit_euler",
            "implicit": "implicit_euler", "implicit-euler": "implicit_euler",
            "rk3-weno5": "rk3_weno5"}
_METHODS = {"barles": "barles", "im": "imbert_monneau",
            "imbert-monneau": "imbert_monneau", "imbert_monneau": "imbert_monneau",
            "discounted": "discounted", "longtime": "longtime"}


def _parse_p(text):
    return tuple(float(v) for v in str(text).split(","))


def parse_pset(text):
    """Slope-set mini-language: ``lo:hi:n`` optionally followed by
    ``:refined@b1,b2`` (geometric clustering near each breakpoint; a leading
    +- on a breakpoint adds both signs), or a plain comma list."""
    text = str(text)
    if ":" not in text:
        return np.array([float(v) for v in text.split(",")])
    parts = text.split(":")
    if len(parts) < 3:
        raise ValueError(f"p-set {text!r}: expected lo:hi:n[:refined@...]")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    breaks = []
    if len(parts) > 3:
        spec = ":".join(parts[3:])
        if not spec.startswith("refined@"):
            raise ValueError(f"p-set {text!r}: trailing part must be refined@...")
        for tok in spec[len("refined@"):].split(","):
            tok = tok.strip()
            if tok.startswith(("±", "+-")):
                val = float(tok.lstrip("±").lstrip("+-"))
                breaks.extend([val, -val])
            else:
                breaks.append(float(tok))
    return tbl.refined_pset(lo, hi, n, breakpoints=breaks)


def emit_history(solution: cp.CellSolution, path, comments=()):
    """History CSV for convergence and periodicity plots: one row per
    record with the scaled statistic and the origin-node offset."""
    if len(solution.history) == 0:
        raise ValueError("solution has an empty history; nothing to emit")
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("tau,scaled_stat,node_minus_stat,lambda_estimate\n")
        for rec in solution.history:
            fh.write(f"{rec['tau']!r},{rec['scaled_stat']!r},"
                     f"{rec['node_minus_stat']!r},{-rec['scaled_stat']!r}\n")


def _provenance(args, parser_name):
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in ("config", "func") and v is not None}
    return [f"effham {__version__}", f"subcommand: {parser_name}",
            "config: " + json.dumps(cfg, default=str, sort_keys=True)]


def _build_flux(H, which, lf_sigma):
    if which == "godunov":
        return godunov_for(H)
    sigma = lf_sigma if lf_sigma is not None else (1.1 * (H.lip_C1 or 1.0),) * (H.dim + 1)
    if np.isscalar(sigma):
        sigma = (float(sigma),) * (H.dim + 1)
    return lax_friedrichs(extend_levelset(H), sigma)


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def _run_cell(args):
    H = builtin(args.hamiltonian)
    method = _METHODS[args.method]
    scheme = _SCHEMES[args.scheme]
    common = dict(tau_max=args.tau_max, tol=args.tol, stat=args.stat,
                  window=args.window, record_dt=args.record_dt,
                  stop_early=not args.no_stop_early)
    p = _parse_p(args.p) if args.p is not None else None
    try:
        if method == "imbert_monneau":
            sol = cp.solve_imbert_monneau(H, p if len(p) > 1 else p[0],
                                          nodes_per_unit=args.nodes_per_unit,
                                          dt=args.dt, scheme=scheme, **common)
        elif method == "barles":
            sol = cp.solve_barles(H, p, nx=args.nx, ny=args.ny, dt=args.dt,
                                  scheme=scheme,
                                  flux=_build_flux(H, args.flux, args.lf_sigma),
                                  **common)
        elif method in ("discounted", "longtime"):
            flux = _build_flux(H, args.flux, args.lf_sigma)
            counts = tuple([args.nx] * H.dim + [args.ny])
            periods = tuple(list(H.x_period) + [H.u_period])
            grid = PeriodicGrid(counts, periods)
            dt = args.dt or cp._round_dt(0.9 * cp.cfl_bound(flux, grid))
            P = p + (-1.0,) if len(p) == H.dim else p
            spec = cp.CellProblemSpec(
                flux=flux, P=P, grid=grid, time=TimeGrid(int(round(1.0 / dt))),
                alpha=args.alpha if method == "discounted" else 0.0,
                scheme="implicit_euler" if method == "discounted" else scheme)
            if method == "discounted":
                sol = cp.solve_discounted(spec, period_tol=args.tol)
            else:
                sol = cp.solve_longtime(spec, tau_max=args.tau_max, stat=args.stat,
                                        window=args.window, tol=args.tol,
                                        record_dt=args.record_dt,
                                        stop_early=not args.no_stop_early)
    except cp.SolverError as exc:
        _emit_partial(exc, args)
        raise
    if args.out:
        emit_history(sol, args.out, comments=_provenance(args, "cell"))
    if args.field_out:
        grids.save_csv(sol.final, args.field_out, comments=_provenance(args, "cell"))
    print(f"lambda={sol.lambda_!r} error_bar={sol.lambda_error_bar:.3e} "
          f"residual={sol.residual:.3e} converged={sol.converged}"
          + (f" out={args.out}" if args.out else ""))
    return 0


def _emit_partial(exc, args):
    sol = getattr(exc, "solution", None)
    if sol is not None and getattr(args, "out", None):
        try:
            emit_history(sol, args.out, comments=["PARTIAL RUN: " + str(exc)])
        except Exception:
            pass


def _run_tabulate(args):
    H = builtin(args.hamiltonian)
    pset = parse_pset(args.p_set)
    method = _METHODS[args.method]
    opts = dict(nodes_per_unit=args.nodes_per_unit, nx=args.nx, ny=args.ny,
                dt=args.dt, tau_max=args.tau_max, tol=args.tol,
                scheme=_SCHEMES[args.scheme], alpha=args.alpha,
                stop_early=not args.no_stop_early)
    t = tbl.tabulate(H, pset, method=method, workers=args.workers, **opts)
    tbl.save(t, args.out)
    if args.csv_out:
        tbl.to_csv(t, args.csv_out, comments=_provenance(args, "tabulate"))
    print(f"table={args.out} vertices={len(t.values)} partial={t.partial}")
    return 0 if not t.partial else 3


def _run_rate(args):
    H = builtin(args.hamiltonian)
    u0 = ivp.parse_u0(args.u0)
    eps = [float(v) for v in args.eps.split(",")]
    if args.table:
        t = tbl.load(args.table)
    else:
        t = _auto_table(H, u0, eps, args)
    report = ivp.rate_experiment(H, t, u0, eps, T=args.T,
                                 nodes_per_epsilon=args.nodes_per_eps)
    with open(args.out, "w") as fh:
        for line in _provenance(args, "rate"):
            fh.write(f"# {line}\n")
        fh.write("eps,h,dt,sup_error,pair_slope\n")
        for row in report.rows():
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"slope={report.slope!r} out={args.out}"
          + (f" flagged={report.flagged!r}" if report.flagged else ""))
    return 0


def _auto_table(H, u0, eps, args):
    """Tabulate on quarter-integer slopes covering the data's slope range."""
    grad = max(abs(s) for s in u0.slope)
    if u0.periodic is not None:
        grad += 2.0 * np.pi  # slope budget of the sinusoidal part
    lo = -(np.ceil(4 * grad) / 4 + 0.5)
    hi = -lo
    ps = list(np.arange(lo, hi + 1e-9, 0.25))
    for s in u0.slope:
        if lo < s < hi:
            ps.append(float(s))
    ps = np.unique(np.round(np.array(ps), 12))
    return tbl.tabulate(H, ps, method="imbert_monneau",
                        nodes_per_unit=args.nodes_per_unit, tau_max=args.tau_max,
                        tol=args.tol, workers=args.workers, stop_early=False)


def _run_check(args):
    H = builtin(args.hamiltonian)
    flux = _build_flux(H, args.flux, args.lf_sigma)
    rep = check_monotone(flux, samples=args.samples, range_=args.range,
                         seed=args.seed)
    ham_rep = check_assumptions(H, samples=min(args.samples, 5000), seed=args.seed)
    ok = rep.passed and ham_rep.all_passed
    cons = _consistency_gap(flux, args.samples, args.seed)
    print(f"monotonicity: {'pass' if rep.passed else 'FAIL'} "
          f"worst_violation={rep.worst_violation:.3e} samples={rep.samples}")
    print(f"consistency : {'pass' if cons <= 1e-12 else 'FAIL'} max_gap={cons:.3e}")
    print(ham_rep.summary())
    return 0 if (ok and cons <= 1e-12) else 3


def _consistency_gap(flux, samples, seed):
    rng = np.random.default_rng(seed)
    n = min(samples, 4096)
    dim = flux.dim_x
    t = rng.uniform(0, 1, n)
    x = rng.uniform(0, 1, (n, dim))
    y = rng.uniform(0, 1, n)
    qx = rng.normal(scale=3.0, size=(n, dim))
    qy = rng.normal(scale=3.0, size=n)
    q = np.empty((n, 2 * (dim + 1)))
    q[:, 0:2 * dim:2] = qx
    q[:, 1:2 * dim:2] = qx
    q[:, 2 * dim] = qy
    q[:, 2 * dim + 1] = qy
    if flux.target is None:
        return float("nan")
    F = flux.target(t, x, y, qx, qy)
    g = flux(t, x, y, q)
    return float(np.abs(np.asarray(g) - np.asarray(F)).max())


def _run_solve(args):
    t = tbl.load(args.table)
    u0 = ivp.parse_u0(args.u0)
    domain = PeriodicGrid((args.nx,) * t.dim, u0.period) if args.nx else None
    res = ivp.solve_homogenized(t, u0, domain=domain, T=args.T, dt=args.dt,
                                sigma=args.sigma)
    comments = _provenance(args, "solve") + [f"slope: {res.slope}"]
    grids.save_csv(res.remainder, args.out, comments=comments)
    print(f"out={args.out} T={res.t_final} dt={res.dt!r}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_common_solver(sp):
    sp.add_argument("--hamiltonian", default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--tau-max", dest="tau_max", type=float, default=60.0)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--window", type=float, default=5.0)
    sp.add_argument("--stat", choices=("median", "mean"), default="median")
    sp.add_argument("--scheme", choices=sorted(_SCHEMES), default="euler")
    sp.add_argument("--flux", choices=("godunov", "lax-friedrichs"), default="godunov")
    sp.add_argument("--lf-sigma", dest="lf_sigma", type=float, default=None)
    sp.add_argument("--nx", type=int, default=400)
    sp.add_argument("--ny", type=int, default=100)
    sp.add_argument("--nodes-per-unit", dest="nodes_per_unit", type=int, default=400)
    sp.add_argument("--alpha", type=float, default=0.01)
    sp.add_argument("--record-dt", dest="record_dt", type=float, default=1.0)
    sp.add_argument("--no-stop-early", dest="no_stop_early", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)


def build_parser():
    ap = argparse.ArgumentParser(prog="effham", description=__doc__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    cell = sub.add_parser("cell", help="solve one cell problem")
    cell.add_argument("--config", default=None)
    cell.add_argument("--method", choices=sorted(_METHODS), default="barles")
    cell.add_argument("--p", default=None)
    cell.add_argument("--out", default=None)
    cell.add_argument("--field-out", dest="field_out", default=None)
    _add_common_solver(cell)
    cell.set_defaults(func=_run_cell)

    tab = sub.add_parser("tabulate", help="tabulate the effective Hamiltonian")
    tab.add_argument("--config", default=None)
    tab.add_argument("--method", choices=("barles", "im", "imbert-monneau", "discounted"),
                     default="im")
    tab.add_argument("--p-set", dest="p_set", default=None)
    tab.add_argument("--out", default="table.json")
    tab.add_argument("--csv-out", dest="csv_out", default=None)
    _add_common_solver(tab)
    tab.set_defaults(func=_run_tabulate)

    rate = sub.add_parser("rate", help="empirical homogenization rate")
    rate.add_argument("--config", default=None)
    rate.add_argument("--u0", default="affine:1.3")
    rate.add_argument("--eps", default="0.2,0.1,0.05,0.025")
    rate.add_argument("--T", type=float, default=0.5)
    rate.add_argument("--nodes-per-eps", dest="nodes_per_eps", type=int, default=50)
    rate.add_argument("--table", default=None)
    rate.add_argument("--out", default="rate.csv")
    _add_common_solver(rate)
    rate.set_defaults(func=_run_rate)

    chk = sub.add_parser("check", help="flux and Hamiltonian property reports")
    chk.add_argument("--config", default=None)
    chk.add_argument("--samples", type=int, default=10000)
    chk.add_argument("--range", type=float, default=5.0)
    _add_common_solver(chk)
    chk.set_defaults(func=_run_check)

    sol = sub.add_parser("solve", help="homogenized initial-value problem")
    sol.add_argument("--config", default=None)
    sol.add_argument("--table", required=False)
    sol.add_argument("--u0", default="sin")
    sol.add_argument("--T", type=float, default=0.5)
    sol.add_argument("--sigma", type=float, default=None)
    sol.add_argument("--out", default="solution.csv")
    _add_common_solver(sol)
    sol.set_defaults(func=_run_solve)
    return ap


def _apply_config(args, parser):
    """Merge a JSON config under the explicit flags; reject unknown keys and
    report every problem at once."""
    if not getattr(args, "config", None):
        _validate(args)
        return
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        _config_fail([f"cannot read config: {exc}"])
    except json.JSONDecodeError as exc:
        _config_fail([f"config is not valid JSON (line {exc.lineno}): {exc.msg}"])
    problems = []
    known = set(vars(args)) - {"func"}
    if not isinstance(doc, dict):
        _config_fail(["config must be a JSON object"])
    sub = doc.pop("subcommand", None)
    if sub is not None and sub != args.subcommand:
        problems.append(f"config subcommand {sub!r} != {args.subcommand!r}")
    defaults = vars(build_parser().parse_args(_min_args(args.subcommand)))
    for key, value in doc.items():
        k = key.replace("-", "_")
        if k not in known:
            problems.append(f"unknown config key {key!r}")
            continue
        # a flag left at its default yields to the config file
        if getattr(args, k) == defaults.get(k):
            setattr(args, k, value)
    if problems:
        _config_fail(problems)
    _validate(args)


def _min_args(sub):
    return [sub]


def _validate(args):
    problems = []
    if getattr(args, "hamiltonian", None):
        try:
            builtin(args.hamiltonian)
        except ValueError as exc:
            problems.append(str(exc))
    elif hasattr(args, "hamiltonian") and args.subcommand in ("cell", "tabulate", "rate", "check"):
        args.hamiltonian = "first_case"
    for key in ("dt", "tol", "tau_max", "alpha"):
        v = getattr(args, key, None)
        if v is not None and v <= 0:
            problems.append(f"--{key.replace('_', '-')} must be positive, got {v}")
    if args.subcommand == "cell" and getattr(args, "p", None) is None:
        problems.append("cell requires --p")
    if args.subcommand == "tabulate" and getattr(args, "p_set", None) is None:
        problems.append("tabulate requires --p-set")
    if args.subcommand == "solve" and not getattr(args, "table", None):
        problems.append("solve requires --table")
    if getattr(args, "p_set", None):
        try:
            parse_pset(args.p_set)
        except ValueError as exc:
            problems.append(str(exc))
    if problems:
        _config_fail(problems)


def _config_fail(problems):
    sys.stderr.write(json.dumps({"error": "config", "problems": problems}) + "\n")
    raise SystemExit(2)


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        _apply_config(args, ap)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.time()
    try:
        code = args.func(args)
    except cp.SolverError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__,
                                     "message": str(exc)}) + "\n")
        return 3
    except (ivp.GradientOutOfHull, ivp.IncompatiblePeriods, tbl.OutOfHull,
            ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__,
                                     "message": str(exc)}) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return 4
    sys.stderr.write(f"wall_time_s: {time.time() - t0:.2f}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
