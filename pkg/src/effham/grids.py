"""Periodic lattices, grid functions, one-sided differences and reductions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform lattice on a product of circles.

    ``counts[k]`` nodes on axis k covering ``[0, periods[k])``; indexing wraps
    modulo ``counts[k]`` on every axis.
    """

    counts: tuple
    periods: tuple

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if len(self.counts) != len(self.periods):
            raise ValueError("counts and periods must have equal length")
        if any(n < 1 for n in self.counts):
            raise ValueError("node counts must be positive")
        if any(p <= 0 for p in self.periods):
            raise ValueError("periods must be positive")

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def steps(self) -> tuple:
        return tuple(p / n for p, n in zip(self.periods, self.counts))

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axis_points(self, axis: int) -> np.ndarray:
        return np.arange(self.counts[axis]) * self.steps[axis]

    def meshes(self):
        """Open (broadcastable) coordinate arrays, one per axis."""
        return np.ix_(*[self.axis_points(k) for k in range(self.ndim)])

    def point(self, index) -> np.ndarray:
        index = np.atleast_1d(np.asarray(index, dtype=int))
        return np.array([self.axis_points(k)[index[k] % self.counts[k]]
                         for k in range(self.ndim)])


@dataclass(frozen=True)
class TimeGrid:
    """Time step resolving one time period with N_t uniform steps."""

    n_steps_per_period: int
    period: float = 1.0

    def __post_init__(self):
        if self.n_steps_per_period < 1:
            raise ValueError("need at least one step per period")

    @property
    def dt(self) -> float:
        return self.period / self.n_steps_per_period

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps_per_period + 1) * self.dt


@dataclass
class GridFunction:
    """Real values on a periodic lattice."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.counts:
            raise ValueError(f"values shape {self.values.shape} != grid counts {self.grid.counts}")

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def assert_finite(self):
        if not np.isfinite(self.values).all():
            raise FloatingPointError("grid function contains non-finite values")

    def __getitem__(self, index):
        index = tuple(int(i) % n for i, n in zip(np.atleast_1d(index), self.grid.counts))
        return float(self.values[index])


def constant(grid: PeriodicGrid, value: float = 0.0) -> GridFunction:
    return GridFunction(grid, np.full(grid.counts, float(value)))


def sample(fn: Callable, grid: PeriodicGrid, t: float = 0.0) -> GridFunction:
    """Sample ``fn(t, x_1, ..., x_ndim)`` (vectorized) on the lattice."""
    meshes = grid.meshes()
    vals = np.asarray(fn(t, *meshes), dtype=float)
    return GridFunction(grid, np.broadcast_to(vals, grid.counts).copy())


def fwd_diff(f: GridFunction, axis: int, index=None):
    """Forward difference (f(i+e_axis) - f(i)) / h with periodic wrap.

    Returns the whole difference array, or the single value at ``index``.
    """
    if axis >= f.grid.ndim:
        raise ValueError(f"axis {axis} out of range for {f.grid.ndim}-d grid")
    h = f.grid.steps[axis]
    if index is None:
        return (np.roll(f.values, -1, axis=axis) - f.values) / h
    index = tuple(int(i) % n for i, n in zip(np.atleast_1d(index), f.grid.counts))
    up = list(index)
    up[axis] = (up[axis] + 1) % f.grid.counts[axis]
    return (f.values[tuple(up)] - f.values[index]) / h


def oscillation(f) -> float:
    """max - min over the lattice."""
    v = f.values if isinstance(f, GridFunction) else np.asarray(f)
    return float(v.max() - v.min())


def median(f) -> float:
    """Lower median: element of rank floor((n-1)/2) of the sorted values."""
    v = (f.values if isinstance(f, GridFunction) else np.asarray(f)).ravel()
    k = (v.size - 1) // 2
    return float(np.partition(v, k)[k])


def mean(f) -> float:
    """Arithmetic mean, exactly-rounded sum so the value is order-independent."""
    v = (f.values if isinstance(f, GridFunction) else np.asarray(f)).ravel(order="C")
    return math.fsum(v) / v.size


# ---------------------------------------------------------------------------
# CSV serialization: one row per node, lattice coordinates then the value
# ---------------------------------------------------------------------------

def save_csv(f: GridFunction, path, comments=()):
    g = f.grid
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(f"# grid counts={','.join(map(str, g.counts))} "
                 f"periods={','.join(repr(p) for p in g.periods)}\n")
        fh.write(",".join(f"x{k}" for k in range(g.ndim)) + ",value\n")
        coords = np.meshgrid(*[g.axis_points(k) for k in range(g.ndim)], indexing="ij")
        flat = [c.ravel() for c in coords] + [f.values.ravel()]
        for row in zip(*flat):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_csv(path) -> GridFunction:
    counts = periods = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# grid "):
                    parts = dict(tok.split("=") for tok in line[7:].split())
                    counts = tuple(int(v) for v in parts["counts"].split(","))
                    periods = tuple(float(v) for v in parts["periods"].split(","))
                continue
            if line[0].isalpha() or line.startswith('"x'):
                continue  # header row
            rows.append([float(v) for v in line.split(",")])
    if counts is None:
        raise ValueError(f"{path}: missing grid metadata comment")
    values = np.array([r[-1] for r in rows]).reshape(counts)
    return GridFunction(PeriodicGrid(counts, periods), values)
