import numpy as np
import pytest
from fractions import Fraction

from effham import cellproblems as cp
from effham.cellproblems import (CellProblemSpec, CFLViolation, IrrationalSlope,
                                 MaxPeriodsExceeded, NotConverged, cfl_bound,
                                 im_period, implicit_step, residual_ergodic,
                                 solve_barles, solve_discounted,
                                 solve_imbert_monneau, solve_longtime, stencil_S)
from effham.fluxes import godunov_for
from effham.grids import GridFunction, PeriodicGrid, TimeGrid, constant, oscillation
from effham.hamiltonians import FIRST_CASE, SECOND_CASE, STATE_FREE_ABS


def cell_grid(nx, ny, H=FIRST_CASE):
    return PeriodicGrid((nx, ny), (H.x_period[0], H.u_period))


def make_spec(H=FIRST_CASE, nx=32, ny=8, P=(1.3, -1.0), alpha=0.0,
              scheme="explicit_euler", nt=None):
    flux = godunov_for(H)
    grid = cell_grid(nx, ny, H)
    if nt is None:
        dt = cp._round_dt(0.9 * cfl_bound(flux, grid))
        nt = int(round(1.0 / dt))
    return CellProblemSpec(flux=flux, P=P, grid=grid, time=TimeGrid(nt),
                           alpha=alpha, scheme=scheme)


class TestStencil:
    def test_constant_zero_gradient(self):
        spec = make_spec()
        W = constant(spec.grid, 3.0)
        S = stencil_S(spec.flux, (0.0, 0.0), W)
        assert np.max(np.abs(S.values)) == 0.0

    def test_constant_consistency(self):
        spec = make_spec()
        W = constant(spec.grid, -1.0)
        P = (1.3, -1.0)
        S = stencil_S(spec.flux, P, W)
        F = spec.flux.target
        X = spec.grid.axis_points(0)[:, None]
        Y = spec.grid.axis_points(1)[None, :]
        want = np.asarray(F(0.0, X[..., None], Y + 0 * X,
                            np.full(spec.grid.counts + (1,), 1.3), -1.0))
        assert np.allclose(S.values, want, atol=1e-12)

    def test_linear_sample_interior(self):
        flux = godunov_for(STATE_FREE_ABS)
        grid = PeriodicGrid((4, 4), (1.0, 1.0))
        xs = grid.axis_points(0)
        W = GridFunction(grid, np.broadcast_to(xs[:, None], (4, 4)).copy())
        val = stencil_S(flux, (0.0, 0.0), W, index=(1, 0))
        # q1 = q2 = 1 at interior nodes -> sqrt((1^-)^2 + (1^+)^2) = 1
        assert val == pytest.approx(1.0, abs=1e-14)


class TestImplicitStep:
    def test_zero_stays_zero(self):
        spec = make_spec()
        out = implicit_step(spec.flux, (0.0, 0.0), 0.1, constant(spec.grid, 0.0),
                            spec.time.dt, spec.time.dt)
        assert np.max(np.abs(out.values)) < 1e-14

    def test_state_free_closed_form(self):
        flux = godunov_for(STATE_FREE_ABS)
        grid = PeriodicGrid((8, 8), (1.0, 1.0))
        dt, alpha = 0.01, 0.3
        P = (2.0, -1.0)
        out = implicit_step(flux, P, alpha, constant(grid, 0.0), dt, dt,
                            inner_tol=1e-13)
        # spatially constant fixed point: W = -dt F(P) / (1 + alpha dt)
        want = -dt * 2.0 / (1 + alpha * dt)
        assert np.allclose(out.values, want, atol=1e-12)

    def test_defect_below_tolerance(self):
        spec = make_spec(nx=50, ny=12, alpha=0.1, scheme="implicit_euler", nt=200)
        W_prev = constant(spec.grid, 0.0)
        tol = 1e-9
        out = implicit_step(spec.flux, spec.P, 0.1, W_prev, spec.time.dt,
                            spec.time.dt, inner_tol=tol)
        S = cp.stencil_array(spec.flux, spec.P, out.values, spec.grid, 0.0)
        defect = (out.values - W_prev.values) / spec.time.dt + 0.1 * out.values + S
        assert np.max(np.abs(defect)) <= tol * 1.01

    def test_inner_tol_validated(self):
        spec = make_spec()
        with pytest.raises(ValueError):
            implicit_step(spec.flux, spec.P, 0.1, constant(spec.grid, 0.0),
                          spec.time.dt, spec.time.dt, inner_tol=0.0)

    def test_divergence_reported(self):
        # undamped fixed point at a step far above the contraction bound
        spec = make_spec(nx=16, ny=8, alpha=0.1, scheme="implicit_euler", nt=4)
        with pytest.raises(cp.InnerIterationDiverged):
            implicit_step(spec.flux, spec.P, 0.1, constant(spec.grid, 0.0),
                          0.25, 0.25, inner_tol=1e-12, max_inner=3, omega=1.0)


class TestDiscounted:
    def test_zero_gradient_zero_solution(self):
        spec = make_spec(P=(0.0, 0.0), alpha=0.1, scheme="implicit_euler", nt=64)
        sol = solve_discounted(spec, period_tol=1e-12)
        assert abs(sol.lambda_) < 1e-10
        assert np.max(np.abs(sol.final.values)) < 1e-10

    def test_state_free_value(self):
        flux = godunov_for(STATE_FREE_ABS)
        grid = PeriodicGrid((8, 8), (1.0, 1.0))
        spec = CellProblemSpec(flux=flux, P=(2.0, -1.0), grid=grid,
                               time=TimeGrid(64), alpha=0.1, scheme="implicit_euler")
        sol = solve_discounted(spec, period_tol=1e-11)
        assert sol.lambda_ == pytest.approx(2.0, abs=1e-8)

    def test_alpha_band_and_bounds(self):
        spec = make_spec(nx=48, ny=12, alpha=0.1, scheme="implicit_euler")
        sol = solve_discounted(spec, period_tol=1e-8)
        W = sol.final.values
        alpha = 0.1
        # |alpha W + lambda| <= alpha * oscillation(W) nodewise
        assert np.max(np.abs(alpha * W + sol.lambda_)) <= alpha * oscillation(sol.final) + 1e-9
        # comparison with constants: sup |alpha W| <= sup |F(., P)|
        F = spec.flux.target
        X, Y = np.meshgrid(spec.grid.axis_points(0), spec.grid.axis_points(1),
                           indexing="ij")
        Fv = np.asarray(F(0.0, X[..., None], Y, np.full(X.shape + (1,), 1.3), -1.0))
        assert np.max(np.abs(alpha * W)) <= np.max(np.abs(Fv)) + 1e-9
        assert sol.lambda_error_bar == pytest.approx(alpha * oscillation(sol.final))
        assert sol.residual <= alpha * oscillation(sol.final) + 1e-6

    def test_uniqueness_across_initial_guesses(self):
        spec = make_spec(nx=24, ny=8, alpha=0.2, scheme="implicit_euler")
        tol = 1e-9
        s1 = solve_discounted(spec, period_tol=tol)
        rng = np.random.default_rng(5)
        W0 = GridFunction(spec.grid, rng.normal(size=spec.grid.counts))
        s2 = solve_discounted(spec, period_tol=tol, W0=W0)
        assert abs(s1.lambda_ - s2.lambda_) <= 2 * tol + 2e-9

    def test_j_independence_when_py_zero(self):
        spec = make_spec(nx=64, ny=16, P=(1.3, 0.0), alpha=0.1,
                         scheme="implicit_euler")
        sol = solve_discounted(spec, period_tol=1e-10)
        W = sol.final.values
        assert np.max(np.abs(W - W[:, :1])) <= 1e-12

    def test_y_monotonicity_negative_py(self):
        spec = make_spec(nx=32, ny=10, P=(1.3, -1.0), alpha=0.1,
                         scheme="implicit_euler")
        sol = solve_discounted(spec, period_tol=1e-9)
        W = sol.final.values
        ys = spec.grid.axis_points(1)
        shifted = W + (-1.0) * ys[None, :]
        # W + p_y y nonincreasing in j across one period (interior pairs)
        assert np.all(np.diff(shifted, axis=1) <= 1e-9)

    def test_discounted_approaches_longtime(self):
        lam_lt = solve_longtime(make_spec(nx=32, ny=8), tau_max=80.0, tol=5e-4,
                                window=10.0, stop_early=False).lambda_
        gaps = []
        for alpha in (0.1, 0.01):
            spec = make_spec(nx=32, ny=8, alpha=alpha, scheme="implicit_euler")
            lam = solve_discounted(spec, period_tol=1e-9).lambda_
            gaps.append(abs(lam - lam_lt))
        osc = 2.0  # coarse a priori bound on the orbit oscillation
        assert gaps[0] <= osc * 0.1 + 5e-3
        assert gaps[1] <= osc * 0.01 + 5e-3
        assert gaps[1] < gaps[0]

    def test_alpha_required(self):
        with pytest.raises(ValueError):
            solve_discounted(make_spec(alpha=0.0, scheme="implicit_euler"))

    def test_max_periods_exceeded_carries_solution(self):
        spec = make_spec(nx=24, ny=8, alpha=0.01, scheme="implicit_euler")
        with pytest.raises(MaxPeriodsExceeded) as exc:
            solve_discounted(spec, period_tol=1e-14, max_periods=2,
                             accelerate=False)
        assert exc.value.solution is not None


class TestLongtime:
    def test_zero_gradient(self):
        sol = solve_longtime(make_spec(P=(0.0, 0.0)), tau_max=8.0, tol=1e-10)
        assert sol.lambda_ == 0.0
        assert np.max(np.abs(sol.final.values)) == 0.0

    def test_state_free_exact_march(self):
        flux = godunov_for(STATE_FREE_ABS)
        grid = PeriodicGrid((8, 8), (1.0, 1.0))
        dt = cp._round_dt(0.9 * cfl_bound(flux, grid))
        spec = CellProblemSpec(flux=flux, P=(2.0, -1.0), grid=grid,
                               time=TimeGrid(int(round(1 / dt))))
        sol = solve_longtime(spec, tau_max=10.0, tol=1e-12)
        # V^n = -n dt F(P) exactly, so stat(V)/tau = -F(P) from the start
        assert sol.lambda_ == pytest.approx(2.0, abs=1e-12)
        assert sol.converged

    def test_comparison_principle(self):
        spec = make_spec(nx=24, ny=8)
        rng = np.random.default_rng(8)
        lo = rng.normal(size=spec.grid.counts) * 0.1
        hi = lo + rng.uniform(0.0, 0.5, size=spec.grid.counts)
        a, b = cp._transport_coeffs(spec.flux, spec.grid, 0.0)
        from effham import kernels

        U = kernels.transport_march(lo.copy(), a, b, spec.P, spec.grid.steps,
                                    spec.time.dt, 50)
        V = kernels.transport_march(hi.copy(), a, b, spec.P, spec.grid.steps,
                                    spec.time.dt, 50)
        assert np.all(U <= V + 1e-12)

    def test_not_converged_carries_history(self):
        spec = make_spec(nx=24, ny=8)
        with pytest.raises(NotConverged) as exc:
            solve_longtime(spec, tau_max=6.0, tol=1e-15, window=3.0)
        sol = exc.value.solution
        assert sol is not None and len(sol.history) >= 1


class TestCFL:
    def test_spec_rejects_supercritical_dt(self):
        flux = godunov_for(FIRST_CASE)
        grid = cell_grid(400, 100)
        with pytest.raises(CFLViolation):
            CellProblemSpec(flux=flux, P=(1.3, -1.0), grid=grid,
                            time=TimeGrid(1000), scheme="explicit_euler")
        # the same step is accepted for the high-order scheme
        CellProblemSpec(flux=flux, P=(1.3, -1.0), grid=grid,
                        time=TimeGrid(1000), scheme="rk3_weno5")

    def test_bound_value(self):
        flux = godunov_for(FIRST_CASE)
        grid = cell_grid(400, 100)
        assert cfl_bound(flux, grid) == pytest.approx((1 / 400) / (2 * 2 * 4.5))


class TestImPeriod:
    def test_first_case_slope(self):
        assert im_period(FIRST_CASE, 1.3) == (5,)
        assert im_period(FIRST_CASE, Fraction(13, 10)) == (5,)
        assert im_period(FIRST_CASE, "1.3") == (5,)

    def test_unit_value_period(self):
        assert im_period(STATE_FREE_ABS, Fraction(3, 2)) == (2,)
        assert im_period(STATE_FREE_ABS, 0) == (1,)
        assert im_period(SECOND_CASE, (1, 1)) == (1, 1)

    def test_irrational_rejected(self):
        with pytest.raises(IrrationalSlope):
            im_period(FIRST_CASE, np.pi)
        with pytest.raises(IrrationalSlope):
            im_period(FIRST_CASE, float("nan"))

    def test_quarter_integers_need_no_period(self):
        for p in (-3.0, -0.5, 0.25, 1.0, 2.75):
            assert im_period(FIRST_CASE, p) == (1,)


class TestImbertMonneau:
    def test_state_free_exact(self):
        sol = solve_imbert_monneau(STATE_FREE_ABS, Fraction(3, 2),
                                   nodes_per_unit=16, tau_max=10.0, tol=1e-12)
        assert sol.lambda_ == pytest.approx(1.5, abs=1e-12)
        assert sol.meta["period"] == (2,)

    def test_first_case_matches_barles(self):
        # coarse cross-check of the two routes
        lam_im = solve_imbert_monneau(FIRST_CASE, 1.3, nodes_per_unit=100,
                                      dt=1 / 400, tau_max=30.0, tol=1e-2,
                                      stop_early=False).lambda_
        lam_b = solve_barles(FIRST_CASE, 1.3, nx=100, ny=25, tau_max=30.0,
                             tol=1e-2, stop_early=False).lambda_
        assert abs(lam_im - lam_b) < 2e-2

    def test_mean_statistic_available(self):
        sol = solve_imbert_monneau(STATE_FREE_ABS, 1, nodes_per_unit=16,
                                   tau_max=8.0, tol=1e-10, stat="mean")
        assert sol.lambda_ == pytest.approx(1.0, abs=1e-12)


class TestBarles:
    def test_state_free(self):
        sol = solve_barles(STATE_FREE_ABS, 2.0, nx=16, ny=16, tau_max=10.0,
                           tol=1e-10)
        assert sol.lambda_ == pytest.approx(2.0, abs=1e-10)

    def test_y_domain_is_value_period(self):
        sol = solve_barles(FIRST_CASE, 1.3, nx=24, ny=6, tau_max=6.0, tol=1.0)
        assert sol.final.grid.periods == (1.0, 0.25)
        sol_full = solve_barles(FIRST_CASE, 1.3, nx=24, ny=24, tau_max=6.0,
                                tol=1.0, full_y_period=True)
        assert sol_full.final.grid.periods == (1.0, 1.0)


class TestTimeDependentCoefficients:
    def test_detection_and_march(self):
        from effham.fluxes import godunov_transport

        def a(t, x):
            return 1.5 + 0.2 * np.cos(2 * np.pi * t) + 0.0 * np.asarray(x)

        def b(t, x, y):
            return np.cos(2 * np.pi * (x - t)) + 0.0 * np.asarray(y)

        flux = godunov_transport(a, b)
        assert flux.time_dependent
        grid = PeriodicGrid((12, 6), (1.0, 1.0))
        dt = cp._round_dt(0.9 * cfl_bound(flux, grid))
        spec = CellProblemSpec(flux=flux, P=(0.8, -1.0), grid=grid,
                               time=TimeGrid(int(round(1 / dt))))
        sol = solve_longtime(spec, tau_max=12.0, tol=5e-2, window=4.0,
                             stop_early=False)
        assert np.isfinite(sol.lambda_)
        assert np.isfinite(sol.final.values).all()

    def test_discounted_time_dependent_orbit(self):
        from effham.fluxes import godunov_transport

        def a(t, x):
            return 1.0 + 0.3 * np.sin(2 * np.pi * t) + 0.0 * np.asarray(x)

        def b(t, x, y):
            return 0.0 * np.asarray(x)

        flux = godunov_transport(a, b)
        grid = PeriodicGrid((10, 4), (1.0, 1.0))
        spec = CellProblemSpec(flux=flux, P=(1.0, 0.0), grid=grid,
                               time=TimeGrid(25), alpha=0.2,
                               scheme="implicit_euler")
        sol = solve_discounted(spec, period_tol=1e-7)
        # a genuinely time-periodic orbit is returned (N_t + 1 snapshots)
        assert len(sol.W) == 26
        osc_orbit = max(w.values.max() for w in sol.W) - min(w.values.min() for w in sol.W)
        assert sol.residual <= 0.2 * osc_orbit + 1e-4
        assert sol.lambda_error_bar == pytest.approx(0.2 * osc_orbit)
        # lambda approximates the time average of a(t) (state-free in x)
        assert sol.lambda_ == pytest.approx(1.0, abs=0.1)


class TestResidual:
    def test_zero_orbit(self):
        spec = make_spec(P=(0.0, 0.0))
        W = constant(spec.grid, 0.0)
        assert residual_ergodic(spec.flux, (0.0, 0.0), 0.0, [W], spec.time.dt) == 0.0

    def test_discounted_orbit_residual(self):
        spec = make_spec(nx=32, ny=8, alpha=0.1, scheme="implicit_euler")
        tol = 1e-9
        sol = solve_discounted(spec, period_tol=tol)
        bound = 0.1 * oscillation(sol.final) + tol / spec.time.dt
        assert sol.residual <= bound

    def test_perturbation_detected(self):
        spec = make_spec(nx=32, ny=8, alpha=0.1, scheme="implicit_euler")
        sol = solve_discounted(spec, period_tol=1e-10)
        dt = spec.time.dt
        W = sol.final
        base = residual_ergodic(spec.flux, spec.P, sol.lambda_, [W, W, W], dt)
        delta = 1e-3
        bumped = W.copy()
        bumped.values[3, 3] += delta
        pert = residual_ergodic(spec.flux, spec.P, sol.lambda_, [W, bumped, W], dt)
        h = spec.grid.steps[0]
        floor = delta / dt - spec.flux.lip_C1t * 4 * delta / h - base
        assert floor > 0  # the bound is informative at this resolution
        assert pert >= floor
