"""Discrete Lax-Oleinik operators as min-plus products with a banded kernel.

A kernel stores one-step actions ``h(y, x)`` for every target ``x`` and every
integer offset ``d`` in a velocity ball, with ``y = x - d``. The backward
operator is ``(T- u)(x) = min_y u(y) + h(y, x)`` and the forward operator
``(T+ u)(x) = max_y u(y) - h(x, y)``; iterating either, modulo constants,
converges to a weak KAM solution and the drift per step to the critical value.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import List, Optional

import numpy as np

from . import _backend
from .grid import GridError, GridFunction, PeriodicGrid, normalize
from .model import LagrangianModel


class ConfigurationError(ValueError):
    pass


class BandOverflowError(ConfigurationError):
    pass


class NonConvergenceError(RuntimeError):
    """Raised when the fixed-point iteration runs out of iterations.

    ``history`` holds the residual rows recorded so far.
    """

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def default_vmax(model: LagrangianModel, grid: PeriodicGrid, dt: float) -> float:
    """Velocity cap from the oscillation of the potential.

    Minimizing velocities satisfy roughly ``|v|^2/2 <= osc(U) + c``, so twice
    ``1 + osc(U)`` leaves a wide margin; the cap is raised when needed so the
    nearest neighbours stay reachable.
    """
    U = model.potential(grid.coords())
    osc = float(np.max(U) - np.min(U))
    return 2.0 * (1.0 + osc) * max(1.0, float(np.max(grid.spacing)) / dt)


class ActionKernel:
    """Banded table of one-step actions on a periodic grid.

    Attributes
    ----------
    offsets : (m, d) int array
        Canonical integer displacements ``x - y``.
    weights : (m, N) float array
        ``weights[o, x] = h(x - offsets[o], x)``.
    pred : (m, N) int array
        Linear index of ``x - offsets[o]``.
    """

    def __init__(self, grid, dt, vmax, offsets, weights, rule="endpoint"):
        self.grid = grid
        self.dt = float(dt)
        self.vmax = float(vmax)
        self.rule = rule
        self.offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, grid.ndim)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        if self.weights.shape != (len(self.offsets), grid.size):
            raise ConfigurationError("weights must have shape (n_offsets, grid size)")
        if not np.all(np.isfinite(self.weights)):
            raise ConfigurationError("kernel entries must be finite")
        canon = grid.canonical_offset(self.offsets)
        if not np.array_equal(canon, self.offsets):
            raise ConfigurationError("offsets must be canonical")
        if len({tuple(o) for o in self.offsets}) != len(self.offsets):
            raise ConfigurationError("duplicate offsets")
        if not np.any(np.all(self.offsets == 0, axis=1)):
            raise ConfigurationError("kernel must contain self-loops")
        multi = grid.unravel(np.arange(grid.size))
        self.pred = np.ascontiguousarray(
            grid.ravel(multi[None, :, :] - self.offsets[:, None, :]), dtype=np.int64
        )
        self.weights.setflags(write=False)

    # -- derived tables ------------------------------------------------------

    @property
    def band(self) -> np.ndarray:
        return np.abs(self.offsets).max(axis=0)

    @property
    def n_edges(self) -> int:
        return self.weights.size

    @cached_property
    def succ(self) -> np.ndarray:
        multi = self.grid.unravel(np.arange(self.grid.size))
        return np.ascontiguousarray(
            self.grid.ravel(multi[None, :, :] + self.offsets[:, None, :]), dtype=np.int64
        )

    @cached_property
    def forward_weights(self) -> np.ndarray:
        """``forward_weights[o, x] = h(x, x + offsets[o])``."""
        rows = np.arange(len(self.offsets))[:, None]
        return np.ascontiguousarray(self.weights[rows, self.succ])

    @cached_property
    def boundary_slots(self) -> np.ndarray:
        """Offsets with a unit-step neighbour outside the band."""
        present = {tuple(o) for o in self.offsets}
        out = np.zeros(len(self.offsets), dtype=bool)
        for i, o in enumerate(self.offsets):
            for a in range(self.grid.ndim):
                for s in (-1, 1):
                    nb = o.copy()
                    nb[a] += s
                    nb = tuple(self.grid.canonical_offset(nb))
                    if nb not in present:
                        out[i] = True
        return out

    def edges(self):
        """Arrays ``(y, x, h)`` of all stored edges."""
        x = np.broadcast_to(np.arange(self.grid.size), self.pred.shape)
        return self.pred.ravel(), x.ravel(), self.weights.ravel()

    def dense(self) -> np.ndarray:
        """Full ``N x N`` matrix ``H[y, x]`` with ``inf`` for absent pairs."""
        H = np.full((self.grid.size, self.grid.size), np.inf)
        y, x, h = self.edges()
        H[y, x] = h
        return H

    def transpose(self) -> "ActionKernel":
        """Kernel of the time-reversed system, ``h'(y, x) = h(x, y)``."""
        offs = self.grid.canonical_offset(-self.offsets)
        return ActionKernel(self.grid, self.dt, self.vmax, offs, self.forward_weights, self.rule)

    def shifted(self, a: float) -> "ActionKernel":
        """Same kernel with the constant ``a`` added to every edge."""
        return ActionKernel(self.grid, self.dt, self.vmax, self.offsets, self.weights + a, self.rule)

    @classmethod
    def from_matrix(cls, grid: PeriodicGrid, dt: float, H) -> "ActionKernel":
        """Kernel from a dense ``H[y, x]``; every offset present must be finite."""
        H = np.asarray(H, dtype=float)
        N = grid.size
        if H.shape != (N, N):
            raise ConfigurationError(f"expected a {N}x{N} matrix")
        multi = grid.unravel(np.arange(N))
        found = {}
        for y in range(N):
            for x in range(N):
                if np.isfinite(H[y, x]):
                    found.setdefault(tuple(grid.canonical_offset(multi[x] - multi[y])), None)
        offsets = np.array(sorted(found), dtype=np.int64).reshape(-1, grid.ndim)
        pred = grid.ravel(multi[None, :, :] - offsets[:, None, :])
        W = H[pred, np.arange(N)[None, :]]
        return cls(grid, dt, np.inf, offsets, W, rule="table")


def _ball_offsets(grid: PeriodicGrid, dt: float, vmax: float):
    h = grid.spacing
    band = np.floor(vmax * dt / h * (1 + 1e-12)).astype(int)
    if np.any(band < 1):
        raise ConfigurationError(
            f"velocity band holds only self-loops on some axis (band={band.tolist()}); "
            f"need vmax >= spacing/dt = {float(np.max(h)) / dt:.6g}"
        )
    found = set()
    for o in product(*(range(-b, b + 1) for b in band)):
        c = tuple(int(a) for a in grid.canonical_offset(np.array(o)))
        if np.linalg.norm(np.array(c) * h) / dt <= vmax * (1 + 1e-12):
            found.add(c)
    return np.array(sorted(found), dtype=np.int64)


def build_kernel(model: LagrangianModel, grid: PeriodicGrid, dt: float,
                 vmax: Optional[float] = None, rule: str = "endpoint") -> ActionKernel:
    """One-step action kernel ``h(y, x) = dt * L(x, (x - y)/dt)``.

    ``rule="midpoint"`` evaluates the position at the middle of the step.
    """
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    if model.ndim != grid.ndim:
        raise ConfigurationError("model and grid dimensions differ")
    if vmax is None:
        vmax = default_vmax(model, grid, dt)
    if not vmax > 0:
        raise ConfigurationError("vmax must be positive")
    if rule not in ("endpoint", "midpoint"):
        raise ConfigurationError(f"unknown quadrature rule {rule!r}")
    offsets = _ball_offsets(grid, dt, vmax)
    disp = offsets * grid.spacing
    x = grid.coords()
    pos = x[None, :, :]
    if rule == "midpoint":
        pos = x[None, :, :] - 0.5 * disp[:, None, :]
    vel = np.broadcast_to((disp / dt)[:, None, :], (len(offsets), grid.size, grid.ndim))
    W = dt * model.lagrangian(np.broadcast_to(pos, vel.shape), vel)
    return ActionKernel(grid, dt, vmax, offsets, W, rule)


def _check_grid(u: GridFunction, k: ActionKernel):
    if u.grid != k.grid:
        raise GridError("grid function and kernel live on different grids")


def apply_backward(u: GridFunction, k: ActionKernel) -> GridFunction:
    """``(T- u)(x) = min_y [u(y) + h(y, x)]``."""
    _check_grid(u, k)
    return GridFunction(k.grid, _backend.minplus_apply(u.values, k.pred, k.weights))


def apply_forward(u: GridFunction, k: ActionKernel) -> GridFunction:
    """``(T+ u)(x) = max_y [u(y) - h(x, y)]``."""
    _check_grid(u, k)
    neg = np.ascontiguousarray(-u.values)
    return GridFunction(k.grid, -_backend.minplus_apply(neg, k.succ, k.forward_weights))


def compose_kernel(k: ActionKernel) -> ActionKernel:
    """Min-plus square of the kernel: the exact two-step operator."""
    if np.any(2 * k.band >= np.asarray(k.grid.dims)):
        raise BandOverflowError(
            f"composed band {2 * k.band.tolist()} does not fit dims {k.grid.dims}"
        )
    g = k.grid
    best = {}
    for o1, d1 in enumerate(k.offsets):
        for o2, d2 in enumerate(k.offsets):
            # y -> z through d1, z -> x through d2
            cand = k.weights[o1][k.pred[o2]] + k.weights[o2]
            key = tuple(int(a) for a in g.canonical_offset(d1 + d2))
            if key in best:
                np.minimum(best[key], cand, out=best[key])
            else:
                best[key] = cand.copy()
    keys = sorted(best)
    W = np.stack([best[key] for key in keys])
    return ActionKernel(g, 2 * k.dt, k.vmax, np.array(keys), W, rule=k.rule)


# -- fixed point iteration ----------------------------------------------------

@dataclass
class SolveResult:
    u: GridFunction
    c_est: float
    iters: int
    direction: str
    history: List[tuple] = field(repr=False)
    residual: float = 0.0
    boundary_hits: int = 0

    def __iter__(self):
        return iter((self.u, self.c_est, self.iters))


def _operator(direction):
    if direction == "backward":
        return apply_backward
    if direction == "forward":
        return apply_forward
    raise ValueError(f"direction must be 'backward' or 'forward', not {direction!r}")


def residual(u: GridFunction, c: float, k: ActionKernel, direction: str = "backward") -> float:
    """``|T u - u -+ c dt|_inf``; sign follows the direction."""
    Tu = _operator(direction)(u, k)
    sign = -1.0 if direction == "backward" else 1.0
    return float(np.max(np.abs(Tu.values - u.values - sign * c * k.dt)))


def solve_weak_kam(k: ActionKernel, direction: str = "backward",
                   seed: Optional[GridFunction] = None, tol: float = 1e-10,
                   max_iter: int = 100_000, anchor: int = 0,
                   window: int = 10, damping: float = 1.0) -> SolveResult:
    """Iterate a Lax-Oleinik operator modulo constants to a fixed point.

    Each step records the mean drift ``s = mean(T u - u)`` and renormalizes
    at ``anchor``. The loop ends once ``window`` consecutive steps change the
    normalized function by at most ``tol`` in sup norm; the critical value
    estimate is the mean drift over those steps divided by ``-dt`` (backward)
    or ``dt`` (forward).

    ``damping < 1`` iterates ``u <- (1 - damping) u + damping T u`` instead.
    The fixed points are the same, and the averaged map converges even when
    the minimizing cycles force the plain iteration to rotate periodically.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    op = _operator(direction)
    sign = -1.0 if direction == "backward" else 1.0
    if seed is None:
        seed = GridFunction.constant(k.grid)
    _check_grid(seed, k)
    u = normalize(seed, anchor)
    history = []
    shifts = []
    streak = 0
    for it in range(1, max_iter + 1):
        Tu = op(u, k)
        if damping != 1.0:
            Tu = GridFunction(k.grid, (1.0 - damping) * u.values + damping * Tu.values)
        s = float(np.mean(Tu.values - u.values)) / damping
        w = normalize(Tu, anchor)
        change = float(np.max(np.abs(w.values - u.values)))
        u = w
        shifts.append(s)
        c_run = sign * float(np.mean(shifts[-window:])) / k.dt
        history.append((it, change, s, c_run))
        streak = streak + 1 if change <= tol else 0
        if streak >= window:
            res = residual(u, c_run, k, direction)
            return SolveResult(u, c_run, it, direction, history, res,
                               _boundary_hits(u, k, direction))
    raise NonConvergenceError(
        f"{direction} iteration did not converge in {max_iter} steps "
        f"(last sup-change {history[-1][1]:.3e})", history)


def _boundary_hits(u: GridFunction, k: ActionKernel, direction: str) -> int:
    """Points whose optimal step uses an offset on the edge of the band."""
    if direction == "backward":
        _, arg = _backend.minplus_argmin(u.values, k.pred, k.weights)
        x = np.arange(k.grid.size)
    else:
        neg = np.ascontiguousarray(-u.values)
        _, arg = _backend.minplus_argmin(neg, k.succ, k.forward_weights)
        x, arg = arg, np.arange(k.grid.size)
    offs = k.grid.canonical_offset(k.grid.unravel(x) - k.grid.unravel(arg))
    lookup = {tuple(o): i for i, o in enumerate(k.offsets)}
    slots = np.array([lookup[tuple(o)] for o in offs])
    return int(np.count_nonzero(k.boundary_slots[slots]))


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "sup_change", "shift", "c_est"])
        for row in history:
            w.writerow([row[0]] + [repr(float(r)) for r in row[1:]])


# -- domination and calibrated orbits -----------------------------------------

@dataclass
class DominationReport:
    worst: float
    violations: List[tuple]

    @property
    def dominated(self) -> bool:
        return self.worst <= 1e-10


def check_domination(u: GridFunction, c: float, k: ActionKernel,
                     slack: float = 1e-10) -> DominationReport:
    """Largest ``u(x) - u(y) - h(y, x) - c dt`` over stored edges.

    Edges exceeding ``slack`` are listed as ``(y, x, excess)``.
    """
    _check_grid(u, k)
    v = u.values
    excess = v[None, :] - v[k.pred] - k.weights - c * k.dt
    worst = float(excess.max())
    bad = np.argwhere(excess > slack)
    viol = [(int(k.pred[o, x]), int(x), float(excess[o, x])) for o, x in bad]
    return DominationReport(worst, viol)


def dominated_envelope(u: GridFunction, k: ActionKernel, c: float,
                       max_iter: int = 100_000) -> GridFunction:
    """Largest function below ``u`` that is dominated by ``L + c``.

    Iterates ``w <- min(w, T-w + c dt)``; this terminates when ``c`` is at
    least the critical value, otherwise a negative cycle is reported.
    """
    _check_grid(u, k)
    w = u.values.copy()
    for _ in range(max_iter):
        nxt = np.minimum(w, _backend.minplus_apply(w, k.pred, k.weights) + c * k.dt)
        if np.array_equal(nxt, w):
            return GridFunction(k.grid, w)
        w = nxt
    raise NonConvergenceError(f"no dominated envelope below c={c!r} within {max_iter} sweeps", [])


@dataclass
class CalibratedOrbit:
    """Backward argmin chain; ``points[0]`` is the starting point."""

    grid: PeriodicGrid
    points: List[int]
    defects: List[float]

    def coordinates(self) -> np.ndarray:
        return self.grid.coords()[self.points]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step"] + [f"x{i}" for i in range(self.grid.ndim)] + ["defect"])
            xs = self.coordinates()
            for i, p in enumerate(self.points):
                d = self.defects[i - 1] if i > 0 else 0.0
                w.writerow([i] + [repr(float(c)) for c in xs[i]] + [repr(float(d))])


def backward_orbit(u: GridFunction, k: ActionKernel, x: int, steps: int,
                   c: float) -> CalibratedOrbit:
    """Follow ``y* = argmin_y u(y) + h(y, x)`` backward in time.

    ``defects[i]`` is the slack ``u(x) - u(y*) - h(y*, x) - c dt`` of step i.
    """
    _check_grid(u, k)
    x = k.grid.check_index(x)
    _, arg = _backend.minplus_argmin(u.values, k.pred, k.weights)
    H = {}
    points = [x]
    defects = []
    v = u.values
    for _ in range(steps):
        y = int(arg[x])
        if x not in H:
            H[x] = dict(zip(k.pred[:, x].tolist(), k.weights[:, x].tolist()))
        defects.append(float(v[x] - v[y] - H[x][y] - c * k.dt))
        points.append(y)
        x = y
    return CalibratedOrbit(k.grid, points, defects)
