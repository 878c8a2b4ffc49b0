"""Discrete numerical Hamiltonians g(t, x, y, q) on one-sided differences.

Slot convention for the difference vector ``q`` (length ``2*(dim_x + 1)``):
forward then backward difference per x axis, then forward and backward
difference along the extra (level-set) axis.  For ``dim_x == 1`` this is the
four-argument flux g(t, x, y, q1, q2, q3, q4): nonincreasing in q1 and q3,
nondecreasing in q2 and q4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .hamiltonians import AnalyticHamiltonian, LevelSetHamiltonian, TransportForm, extend_levelset


class NonCoercive(ValueError):
    """The transport coefficient a is not bounded away from zero."""


def _pos(q):
    return np.maximum(q, 0.0)


def _neg(q):
    return np.maximum(-q, 0.0)


@dataclass(frozen=True)
class NumericalHamiltonian:
    """A monotone flux with its consistency target and scheme constants."""

    dim_x: int
    eval: Callable  # eval(t, x, y, q); x last axis dim_x, q last axis 2*(dim_x+1)
    lip_C1t: float
    coer_C2t: float
    coer_C3t: float
    target: Optional[LevelSetHamiltonian] = None
    transport: Optional[TransportForm] = None
    time_dependent: bool = False
    kind: str = "custom"

    @property
    def n_slots(self) -> int:
        return 2 * (self.dim_x + 1)

    def __call__(self, t, x, y, q):
        return self.eval(t, x, y, q)


def _transport_eval(a, b, dim):
    def eval(t, x, y, q):
        x = np.asarray(x, dtype=float)
        q = np.asarray(q, dtype=float)
        coords = [x[..., k] for k in range(dim)] if x.ndim else [x]
        qf = q[..., 0:2 * dim:2]
        qb = q[..., 1:2 * dim:2]
        gx = np.sqrt(np.sum(_neg(qf) ** 2 + _pos(qb) ** 2, axis=-1))
        q3 = q[..., 2 * dim]
        q4 = q[..., 2 * dim + 1]
        bv = np.asarray(b(t, *coords, y), dtype=float)
        gy = _pos(bv) * np.sqrt(_neg(q3) ** 2 + _pos(q4) ** 2) \
            - _neg(bv) * np.sqrt(_pos(q3) ** 2 + _neg(q4) ** 2)
        return np.asarray(a(t, *coords), dtype=float) * gx + gy

    return eval


def godunov_transport(a, b, dim: int = 1, inf_a=None, sup_a=None, sup_abs_b=None,
                      target: Optional[LevelSetHamiltonian] = None,
                      time_dependent: Optional[bool] = None,
                      samples: int = 4096, seed: int = 0) -> NumericalHamiltonian:
    """Godunov flux for F = a(t,x)|p_x| + b(t,x,y)|p_y|.

    Per x axis the flux contributes the sign-split square root of the
    one-sided differences; the y part splits on the sign of b.  Coefficient
    bounds not supplied are estimated by sampling (builtins pass exact ones).
    """
    rng = np.random.default_rng(seed)
    if inf_a is None or sup_a is None or sup_abs_b is None or time_dependent is None:
        t = rng.uniform(0.0, 1.0, size=samples)
        xs = [rng.uniform(0.0, 1.0, size=samples) for _ in range(dim)]
        y = rng.uniform(0.0, 1.0, size=samples)
        a_vals = np.asarray(a(t, *xs), dtype=float) + np.zeros(samples)
        b_vals = np.asarray(b(t, *xs, y), dtype=float) + np.zeros(samples)
        if inf_a is None:
            inf_a = float(a_vals.min())
        if sup_a is None:
            sup_a = float(a_vals.max())
        if sup_abs_b is None:
            sup_abs_b = float(np.abs(b_vals).max())
        if time_dependent is None:
            a2 = np.asarray(a(t + 0.37, *xs), dtype=float) + np.zeros(samples)
            b2 = np.asarray(b(t + 0.37, *xs, y), dtype=float) + np.zeros(samples)
            time_dependent = bool(np.any(a2 != a_vals) or np.any(b2 != b_vals))
    if inf_a <= 0:
        raise NonCoercive(f"inf a = {inf_a} must be positive")
    return NumericalHamiltonian(
        dim_x=dim,
        eval=_transport_eval(a, b, dim),
        lip_C1t=float(sup_a) + float(sup_abs_b),
        coer_C2t=float(inf_a),
        coer_C3t=0.0,
        target=target,
        transport=TransportForm(a=a, b=b, inf_a=float(inf_a), sup_a=float(sup_a),
                                sup_abs_b=float(sup_abs_b)),
        time_dependent=bool(time_dependent),
        kind="godunov",
    )


def godunov_for(H: AnalyticHamiltonian) -> NumericalHamiltonian:
    """Godunov flux consistent with the level-set extension of a
    transport-form Hamiltonian (the b coefficient reads the extra coordinate)."""
    if H.structure is None:
        raise ValueError("godunov_for needs a transport-form Hamiltonian; "
                         "use lax_friedrichs for generic ones")
    s = H.structure
    return godunov_transport(s.a, s.b, dim=H.dim, inf_a=s.inf_a, sup_a=s.sup_a,
                             sup_abs_b=s.sup_abs_b, target=extend_levelset(H),
                             time_dependent=False)


def lax_friedrichs(F: LevelSetHamiltonian, sigma, gradient_range: float = 10.0) -> NumericalHamiltonian:
    """Central flux with slot-wise artificial viscosity sigma (one per axis,
    the last entry for the extra axis).  Monotone only where sigma dominates
    the local Lipschitz constant of F; see check_monotone."""
    dim = F.base.dim
    sigma = tuple(float(s) for s in np.atleast_1d(sigma))
    if len(sigma) != dim + 1:
        raise ValueError(f"need {dim + 1} sigma entries, got {len(sigma)}")

    def eval(t, x, y, q):
        q = np.asarray(q, dtype=float)
        qf = q[..., 0:2 * dim:2]
        qb = q[..., 1:2 * dim:2]
        px = 0.5 * (qf + qb)
        py = 0.5 * (q[..., 2 * dim] + q[..., 2 * dim + 1])
        visc = 0.0
        for k in range(dim):
            visc = visc + 0.5 * sigma[k] * (qf[..., k] - qb[..., k])
        visc = visc + 0.5 * sigma[dim] * (q[..., 2 * dim] - q[..., 2 * dim + 1])
        return F(t, x, y, px, py) - visc

    lip = 0.5 * ((F.base.lip_C1 or max(sigma)) + max(sigma))
    return NumericalHamiltonian(
        dim_x=dim,
        eval=eval,
        lip_C1t=lip,
        coer_C2t=0.5 * F.coercivity_C2,
        coer_C3t=max(sigma) * gradient_range,
        target=F,
        transport=None,
        time_dependent=True,
        kind="lax_friedrichs",
    )


@dataclass
class MonotonicityReport:
    samples: int
    worst_violation: float
    n_violations: int
    tol: float = 1e-12

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tol


def check_monotone(g: NumericalHamiltonian, samples: int = 1000, range_: float = 5.0,
                   seed: int = 0) -> MonotonicityReport:
    """Probe (g1): random base points, random positive bumps per slot; the
    flux must not increase in forward slots nor decrease in backward ones."""
    if range_ <= 0:
        raise ValueError("range must be positive")
    rng = np.random.default_rng(seed)
    n = samples
    dim = g.dim_x
    t = rng.uniform(0.0, 1.0, size=n)
    x = rng.uniform(0.0, 1.0, size=(n, dim))
    y = rng.uniform(0.0, 1.0, size=n)
    q = rng.uniform(-range_, range_, size=(n, g.n_slots))
    delta = rng.uniform(1e-6, range_ / 4.0, size=n)
    base = np.asarray(g(t, x, y, q), dtype=float)
    worst = 0.0
    nviol = 0
    for slot in range(g.n_slots):
        qq = q.copy()
        qq[:, slot] += delta
        bumped = np.asarray(g(t, x, y, qq), dtype=float)
        # even slots hold forward differences (nonincreasing), odd backward
        viol = (bumped - base) if slot % 2 == 0 else (base - bumped)
        worst = max(worst, float(viol.max()))
        nviol += int(np.count_nonzero(viol > 1e-12))
    return MonotonicityReport(samples=n * g.n_slots, worst_violation=worst, n_violations=nviol)
