"""Fifth-order weighted-ENO one-sided derivatives and TVD third-order
Runge-Kutta time stepping.

The reconstruction combines three cubic candidate stencils with linear
weights 1/10, 6/10, 3/10 and Jiang-Shu smoothness indicators; the nonlinear
weights are regularized by ``epsilon_w`` (default 1e-6).  The fused solver
kernels always use the default regularization; the standalone operator below
accepts a custom one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grids import GridFunction, PeriodicGrid


class GridTooCoarse(ValueError):
    """The 6-point stencil does not fit on the grid."""


@dataclass
class WenoWorkspace:
    grid: PeriodicGrid
    epsilon_w: float = 1e-6
    _stages: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.epsilon_w <= 0:
            raise ValueError("epsilon_w must be positive")
        self._stages = [np.empty(self.grid.counts) for _ in range(3)]

    def rk3(self, rhs, values, dt):
        """Shu-Osher stages using the workspace buffers."""
        s0, s1, s2 = self._stages
        np.add(values, dt * rhs(values), out=s0)
        np.copyto(s1, 0.75 * values + 0.25 * (s0 + dt * rhs(s0)))
        np.copyto(s2, values / 3.0 + (2.0 / 3.0) * (s1 + dt * rhs(s1)))
        return s2.copy()


def weno_one_sided(f: GridFunction, axis: int, direction: str, index=None,
                   epsilon_w: float = 1e-6):
    """Fifth-order one-sided first derivative along ``axis``.

    ``direction='minus'`` biases the stencil to the left of each node,
    ``'plus'`` to the right.  Returns the full array, or one value at
    ``index``.
    """
    if direction not in ("minus", "plus"):
        raise ValueError("direction must be 'minus' or 'plus'")
    if f.grid.counts[axis] < 6:
        raise GridTooCoarse(f"axis {axis} has {f.grid.counts[axis]} nodes; WENO needs >= 6")
    h = f.grid.steps[axis]
    if epsilon_w == kernels.WENO_EPS:
        dm, dp = kernels.weno_pm(f.values, h, axis)
    else:
        dm, dp = kernels._np_weno_pm(f.values, h, axis, eps=epsilon_w)
    out = dm if direction == "minus" else dp
    if index is None:
        return out
    idx = tuple(int(i) % n for i, n in zip(np.atleast_1d(index), f.grid.counts))
    return float(out[idx])


def rk3_step(rhs, f, dt):
    """One TVD-RK3 step: f1 = f + dt rhs(f); f2 = 3/4 f + 1/4 (f1 + dt rhs(f1));
    returns 1/3 f + 2/3 (f2 + dt rhs(f2)).  Works on arrays, scalars and
    GridFunctions (rhs must take and return the same kind)."""
    if isinstance(f, GridFunction):
        v = rk3_step(lambda a: rhs(GridFunction(f.grid, a)).values, f.values, dt)
        return GridFunction(f.grid, v)
    f1 = f + dt * rhs(f)
    f2 = 0.75 * f + 0.25 * (f1 + dt * rhs(f1))
    return f / 3.0 + (2.0 / 3.0) * (f2 + dt * rhs(f2))
