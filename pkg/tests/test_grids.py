import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effham.grids import (GridFunction, PeriodicGrid, TimeGrid, constant, fwd_diff,
                          load_csv, mean, median, oscillation, sample, save_csv)


def grid1d(n, period=1.0):
    return PeriodicGrid((n,), (period,))


def test_grid_basics():
    g = PeriodicGrid((4, 8), (1.0, 0.25))
    assert g.steps == (0.25, 0.03125)
    assert g.size == 32
    assert np.allclose(g.axis_points(0), [0, 0.25, 0.5, 0.75])
    with pytest.raises(ValueError):
        PeriodicGrid((0,), (1.0,))
    with pytest.raises(ValueError):
        PeriodicGrid((4,), (-1.0,))


def test_time_grid():
    tg = TimeGrid(1000)
    assert tg.dt == pytest.approx(1e-3, abs=1e-18)
    assert abs(tg.dt * tg.n_steps_per_period - 1.0) < 1e-12


def test_fwd_diff_constant():
    f = constant(grid1d(10), 5.0)
    assert np.all(fwd_diff(f, 0) == 0.0)


def test_fwd_diff_linear_with_wrap():
    g = grid1d(10)
    f = GridFunction(g, g.axis_points(0).copy())
    d = fwd_diff(f, 0)
    assert np.allclose(d[:-1], 1.0, atol=1e-12)
    # wrap node: (f(0) - f(0.9)) / 0.1 = -9
    assert d[-1] == pytest.approx(-9.0, abs=1e-12)
    assert fwd_diff(f, 0, index=(9,)) == pytest.approx(-9.0, abs=1e-12)


def test_fwd_diff_sin_first_order():
    n = 1000
    g = grid1d(n)
    xs = g.axis_points(0)
    f = GridFunction(g, np.sin(2 * np.pi * xs))
    d = fwd_diff(f, 0)
    err = np.max(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * xs)))
    assert err <= np.pi ** 2 * 2 * np.pi * (1.0 / n)


def test_sample():
    g = grid1d(4)
    assert np.all(sample(lambda t, x: 3.0 + 0 * x, g).values == 3.0)
    assert np.allclose(sample(lambda t, x: x, g).values, [0, 0.25, 0.5, 0.75])
    pot = sample(lambda t, x: 2 * np.cos(2 * np.pi * x), g)
    assert np.allclose(pot.values, [2, 0, -2, 0], atol=1e-15)


def test_reductions():
    g = grid1d(4)
    f = GridFunction(g, np.array([1.0, 2.0, 3.0, 4.0]))
    assert oscillation(f) == 3.0
    assert median(f) == 2.0  # lower median
    assert mean(f) == pytest.approx(2.5, abs=1e-15)
    f2 = GridFunction(g, np.array([0.0, 0.0, 0.0, 10.0]))
    assert median(f2) == 0.0
    c = constant(g, 7.5)
    assert oscillation(c) == 0.0 and median(c) == 7.5 and mean(c) == 7.5


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=64))
def test_fwd_diff_telescopes(vals):
    n = len(vals)
    g = grid1d(n)
    f = GridFunction(g, np.array(vals))
    total = fwd_diff(f, 0).sum()
    scale = max(1.0, np.max(np.abs(vals)) / g.steps[0])
    assert abs(total) <= 1e-10 * scale


def test_sampling_is_deterministic():
    g = PeriodicGrid((32, 8), (1.0, 0.25))
    a = sample(lambda t, x, y: np.cos(x) * np.sin(y + t), g, t=0.3)
    b = sample(lambda t, x, y: np.cos(x) * np.sin(y + t), g, t=0.3)
    assert np.array_equal(a.values, b.values)


def test_values_shape_checked():
    with pytest.raises(ValueError):
        GridFunction(grid1d(4), np.zeros(5))


def test_csv_roundtrip(tmp_path):
    g = PeriodicGrid((6, 3), (1.0, 0.25))
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.normal(size=(6, 3)))
    path = tmp_path / "field.csv"
    save_csv(f, path, comments=["unit test"])
    back = load_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_assert_finite():
    f = constant(grid1d(3), 1.0)
    f.values[1] = np.nan
    with pytest.raises(FloatingPointError):
        f.assert_finite()
