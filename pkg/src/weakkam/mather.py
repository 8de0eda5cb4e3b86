"""Conjugate weak KAM pairs and the grid approximation of the Mather set.

The set returned here is the zero set of ``u_minus - u_plus`` together with a
minimizing cycle. On the grid this is an Aubry-type over-approximation of the
projected Mather set; it coincides with it in the examples shipped with the
package.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .critical import ConsistencyError, MinMeanCycleResult, karp_min_mean_cycle
from .grid import GridFunction
from .model import LagrangianModel
from .semigroup import ActionKernel, solve_weak_kam


@dataclass
class ConjugatePair:
    kernel: ActionKernel
    u_minus: GridFunction
    u_plus: GridFunction
    c: float
    c_minus: float
    c_plus: float

    @property
    def gap(self) -> GridFunction:
        return self.u_minus - self.u_plus


def conjugate_pair(k: ActionKernel, tol: float = 1e-10, max_iter: int = 100_000,
                   seed: Optional[GridFunction] = None, damping: float = 1.0) -> ConjugatePair:
    """Backward solution, then the forward solution seeded with it.

    ``u_plus`` is shifted so that ``min(u_minus - u_plus) == 0``.
    """
    back = solve_weak_kam(k, "backward", seed, tol, max_iter, damping=damping)
    fwd = solve_weak_kam(k, "forward", back.u, tol, max_iter, damping=damping)
    if abs(back.c_est - fwd.c_est) > 2 * tol / k.dt:
        raise ConsistencyError(
            f"backward and forward critical values differ: {back.c_est!r} vs {fwd.c_est!r}",
            c_minus=back.c_est, c_plus=fwd.c_est)
    gap = back.u.values - fwd.u.values
    u_plus = fwd.u + float(gap.min())
    return ConjugatePair(k, back.u, u_plus, back.c_est, back.c_est, fwd.c_est)


@dataclass
class MatherSetApprox:
    points: List[int]
    tol: float
    cycle: List[int]

    def as_set(self) -> set:
        return set(self.points)


def mather_set_approx(pair: ConjugatePair, tol: float = 1e-6,
                      cycle: Optional[MinMeanCycleResult] = None) -> MatherSetApprox:
    """``{x : gap(x) <= tol}`` united with a minimum mean cycle."""
    if cycle is None:
        cycle = karp_min_mean_cycle(pair.kernel)
    gap = pair.gap.values
    if gap.min() < -1e-10:
        raise ValueError(f"negative gap {gap.min():.3e}: pair is not aligned")
    pts = set(np.flatnonzero(gap <= tol).tolist()) | set(cycle.cycle)
    return MatherSetApprox(sorted(pts), tol, list(cycle.cycle))


def discrete_gradient(u: GridFunction, x: int) -> np.ndarray:
    """Centered differences of ``u`` at ``x`` along each axis."""
    g = u.grid
    m = g.unravel(x)
    out = np.empty(g.ndim)
    for a in range(g.ndim):
        e = np.zeros(g.ndim, dtype=int)
        e[a] = 1
        out[a] = (u.values[g.ravel(m + e)] - u.values[g.ravel(m - e)]) / (2 * g.spacing[a])
    return out


def gradient_consistency(pair: ConjugatePair, model: LagrangianModel,
                         cycle: Sequence[int]) -> float:
    """Largest componentwise gap between du and dL/dv along a cycle.

    For each cycle edge ``y -> x`` the velocity is the wrapped displacement
    over ``dt``; ``dL/dv`` is taken by finite differences of the model.
    """
    k = pair.kernel
    g = k.grid
    cycle = list(cycle)
    worst = 0.0
    for i, x in enumerate(cycle):
        y = cycle[i - 1] if len(cycle) > 1 else x
        disp = g.canonical_offset(g.unravel(x) - g.unravel(y)) * g.spacing
        v = disp / k.dt
        p = model.velocity_gradient(g.coords()[x], v)
        du = discrete_gradient(pair.u_minus, x)
        worst = max(worst, float(np.max(np.abs(du - p))))
    return worst


def write_mather_set(path, k: ActionKernel, mset: MatherSetApprox):
    xs = k.grid.coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{i}" for i in range(k.grid.ndim)])
        for p in mset.points:
            w.writerow([p] + [repr(float(c)) for c in xs[p]])
