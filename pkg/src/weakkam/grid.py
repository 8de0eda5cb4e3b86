"""Periodic grids and functions sampled on them.

Multi-dimensional indices are linearized in row-major (C) order; this is the
layout used for every array and every CSV file written by the package.
Coordinates are centered: along an axis with ``n`` points and period ``L``
the index ``i`` sits at ``i*h`` for ``i <= n//2`` and at ``(i-n)*h`` above,
so that index reflections ``i -> -i mod n`` negate coordinates exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GridError(ValueError):
    """Invalid grid construction or grid mismatch."""


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on a flat torus.

    Parameters
    ----------
    dims : tuple of int
        Number of points per axis (each at least 3).
    lengths : tuple of float
        Physical period per axis.
    """

    dims: tuple
    lengths: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lengths = tuple(float(a) for a in self.lengths)
        if len(dims) == 0 or len(dims) != len(lengths):
            raise GridError("dims and lengths must be non-empty and of equal length")
        if any(n < 3 for n in dims):
            raise GridError(f"every axis needs at least 3 points, got dims={dims}")
        if any(not np.isfinite(a) or a <= 0 for a in lengths):
            raise GridError(f"axis lengths must be positive, got {lengths}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def circle(cls, n: int, length: float = 2 * np.pi) -> "PeriodicGrid":
        return cls((n,), (length,))

    @classmethod
    def torus(cls, dims: Sequence[int], length: float = 2 * np.pi) -> "PeriodicGrid":
        return cls(tuple(dims), tuple(length for _ in dims))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a / n for a, n in zip(self.lengths, self.dims)])

    def check_index(self, index: int) -> int:
        index = int(index)
        if not 0 <= index < self.size:
            raise IndexError(f"grid index {index} outside [0, {self.size})")
        return index

    def unravel(self, index) -> np.ndarray:
        """Multi-index (last axis fastest) of linear index or array of indices."""
        return np.stack(np.unravel_index(index, self.dims), axis=-1)

    def ravel(self, multi) -> np.ndarray:
        multi = np.asarray(multi)
        wrapped = np.mod(multi, self.dims)
        return np.ravel_multi_index(tuple(np.moveaxis(wrapped, -1, 0)), self.dims)

    def canonical_offset(self, offset) -> np.ndarray:
        """Integer offsets wrapped into (-n/2, n/2], ties toward positive."""
        offset = np.asarray(offset)
        dims = np.asarray(self.dims)
        half = dims // 2
        r = np.mod(offset, dims)
        return np.where(r > half, r - dims, r)

    def coords(self) -> np.ndarray:
        """Centered physical coordinates, shape ``(size, ndim)``."""
        multi = self.unravel(np.arange(self.size))
        return self.canonical_offset(multi) * self.spacing

    def point(self, index: int) -> np.ndarray:
        index = self.check_index(index)
        return self.canonical_offset(self.unravel(index)) * self.spacing

    def nearest_index(self, x) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        multi = np.rint(x / self.spacing).astype(int)
        return int(self.ravel(multi))


def wrap_displacement(grid: PeriodicGrid, source: int, target: int) -> np.ndarray:
    """Shortest signed displacement from ``source`` to ``target``.

    Per axis the displacement has magnitude at most half a period; an exact
    half-period tie is reported with positive sign.
    """
    a = grid.unravel(grid.check_index(source))
    b = grid.unravel(grid.check_index(target))
    return grid.canonical_offset(b - a) * grid.spacing


@dataclass(frozen=True)
class GridFunction:
    """Finite real values attached to every point of a grid."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.size:
            raise GridError(
                f"expected {self.grid.size} values, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: PeriodicGrid, c: float = 0.0) -> "GridFunction":
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def from_callable(cls, grid: PeriodicGrid, f) -> "GridFunction":
        """Sample ``f(coords)`` where coords has shape ``(size, ndim)``."""
        return cls(grid, f(grid.coords()))

    def as_array(self) -> np.ndarray:
        """Values reshaped to the grid's dims."""
        return self.values.reshape(self.grid.dims)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            other = other.values
        return GridFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            other = other.values
        return GridFunction(self.grid, self.values - other)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def sup_distance(self, other: "GridFunction") -> float:
        _check_same_grid(self, other)
        return float(np.max(np.abs(self.values - other.values)))


def _check_same_grid(u: GridFunction, w: GridFunction):
    if u.grid != w.grid:
        raise GridError("grid functions live on different grids")


def normalize(u: GridFunction, anchor: int = 0) -> GridFunction:
    """Shift ``u`` by a constant so that it vanishes at ``anchor``."""
    anchor = u.grid.check_index(anchor)
    return GridFunction(u.grid, u.values - u.values[anchor])


def write_grid_function(path, u: GridFunction, name: str = "value"):
    """CSV with coordinate columns then the value, rows in row-major order."""
    coords = u.grid.coords()
    header = [f"x{i}" for i in range(u.grid.ndim)] + [name]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, val in zip(coords, u.values):
            w.writerow([repr(float(c)) for c in x] + [repr(float(val))])


def read_grid_function(path, grid: PeriodicGrid) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    if data.shape != (grid.size, grid.ndim + 1):
        raise GridError(f"{path}: expected {grid.size} rows of {grid.ndim + 1} columns")
    return GridFunction(grid, data[:, -1])
