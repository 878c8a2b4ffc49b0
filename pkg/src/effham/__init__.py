"""effham: effective Hamiltonians of value-periodic Hamilton-Jacobi
equations via discrete cell problems, with homogenized/oscillatory solvers
and empirical convergence-rate experiments."""

__version__ = "0.1.0"

from .backend import NUMBA_ENABLED
from .hamiltonians import (AnalyticHamiltonian, LevelSetHamiltonian, TransportForm,
                           builtin, check_assumptions, extend_levelset, recession,
                           state_free, transport_hamiltonian)
from .grids import (GridFunction, PeriodicGrid, TimeGrid, fwd_diff, mean, median,
                    oscillation, sample)
from .fluxes import (NumericalHamiltonian, check_monotone, godunov_for,
                     godunov_transport, lax_friedrichs)
from .cellproblems import (CellProblemSpec, CellSolution, cfl_bound, im_period,
                           implicit_step, residual_ergodic, solve_barles,
                           solve_discounted, solve_imbert_monneau, solve_longtime,
                           stencil_S)
from .weno import WenoWorkspace, rk3_step, weno_one_sided
from .table import (EffHamTable, interpolate, load, make_table, refined_pset,
                    save, tabulate, verify_table)
from .ivp import (InitialData, affine, rate_experiment, sinusoid,
                  solve_homogenized, solve_oscillatory)
