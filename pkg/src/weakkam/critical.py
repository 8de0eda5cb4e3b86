"""Critical value as the min-plus eigenvalue of the kernel (minimum mean cycle)."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _backend
from .grid import GridFunction
from .semigroup import ActionKernel, solve_weak_kam


class ConsistencyError(RuntimeError):
    """Two routes to the same quantity disagree beyond tolerance."""

    def __init__(self, message, **values):
        super().__init__(message)
        self.values = values


@dataclass
class MinMeanCycleResult:
    """``lam`` is the cycle mean recomputed exactly from ``weights``."""

    lam: float
    cycle: List[int]
    weights: List[float]
    karp_value: float

    def critical_value(self, dt: float) -> float:
        return -self.lam / dt


def _edge_weight(k: ActionKernel, y: int, x: int) -> float:
    slots = np.flatnonzero(k.pred[:, x] == y)
    return float(k.weights[slots, x].min())


def karp_min_mean_cycle(k: ActionKernel) -> MinMeanCycleResult:
    """Karp's recurrence with a virtual source joined to every vertex.

    ``D[j, x]`` is the least weight of a ``j``-edge walk ending at ``x``; the
    minimum cycle mean is ``min_x max_j (D[N, x] - D[j, x]) / (N - j)``. The
    witness is a cycle on the optimal ``N``-edge walk into the minimizing
    vertex, recovered by exact back-substitution in ``D``.
    """
    N = k.grid.size
    D = _backend.karp_table(k.pred, k.weights, N)
    per_vertex = np.full(N, -np.inf)
    for j in range(N):
        np.maximum(per_vertex, (D[N] - D[j]) / (N - j), out=per_vertex)
    v = int(np.argmin(per_vertex))
    karp_value = float(per_vertex[v])

    walk = [v]
    x = v
    for step in range(N, 0, -1):
        cand = D[step - 1][k.pred[:, x]] + k.weights[:, x]
        hit = k.pred[cand == D[step, x], x]
        x = int(hit.min())
        walk.append(x)
    # walk runs backward in time; the first repeat closes a cycle
    seen = {}
    for i, y in enumerate(walk):
        if y in seen:
            cyc = walk[seen[y]:i + 1][::-1]
            break
        seen[y] = i
    cycle = cyc[:-1]
    weights = [_edge_weight(k, cyc[i], cyc[i + 1]) for i in range(len(cycle))]
    lam = math.fsum(weights) / len(weights)
    if abs(lam - karp_value) > 1e-9 * max(1.0, abs(karp_value)):
        raise ConsistencyError("witness cycle mean differs from Karp value",
                               lam=lam, karp=karp_value)
    return MinMeanCycleResult(lam, cycle, weights, karp_value)


@dataclass
class CriticalReport:
    c_disc: float
    c_est: float
    gap: float
    iters: int
    cycle: List[int]

    def as_dict(self):
        return {"c_disc": self.c_disc, "c_est": self.c_est, "gap": self.gap,
                "iters": self.iters, "cycle_length": len(self.cycle)}


def critical_value(k: ActionKernel, tol: float = 1e-10, max_iter: int = 100_000,
                   damping: float = 1.0):
    """Critical value from Karp, cross-checked against value iteration.

    Returns ``(c, report)`` with ``c`` the Karp value; raises
    :class:`ConsistencyError` if the two estimates differ by more than
    ``10 tol / dt``.
    """
    mmc = karp_min_mean_cycle(k)
    c_disc = mmc.critical_value(k.dt)
    sol = solve_weak_kam(k, "backward", tol=tol, max_iter=max_iter, damping=damping)
    gap = abs(c_disc - sol.c_est)
    report = CriticalReport(c_disc, sol.c_est, gap, sol.iters, mmc.cycle)
    if gap > 10 * tol / k.dt:
        raise ConsistencyError(
            f"Karp value {c_disc!r} and iteration estimate {sol.c_est!r} differ by {gap:.3e}",
            c_disc=c_disc, c_est=sol.c_est)
    return c_disc, report


def critical_components(u: GridFunction, c: float, k: ActionKernel,
                        slack: float = 1e-9) -> List[List[int]]:
    """Strongly connected pieces of the critical graph.

    Edges whose domination inequality is tight within ``slack`` are kept for
    a fixed point ``u``; components carrying a cycle are returned. A single
    component means the fixed point is unique up to constants.
    """
    v = u.values
    reduced = k.weights + c * k.dt - (v[None, :] - v[k.pred])
    o, x = np.nonzero(reduced <= slack)
    y = k.pred[o, x]
    N = k.grid.size
    G = coo_matrix((np.ones(len(x)), (y, x)), shape=(N, N)).tocsr()
    ncomp, labels = connected_components(G, directed=True, connection="strong")
    selfloop = np.zeros(N, dtype=bool)
    selfloop[y[y == x]] = True
    sizes = np.bincount(labels, minlength=ncomp)
    out = []
    for comp in range(ncomp):
        members = np.flatnonzero(labels == comp)
        if sizes[comp] > 1 or selfloop[members].any():
            out.append(members.tolist())
    return out


def write_cycle(path, k: ActionKernel, result: MinMeanCycleResult):
    xs = k.grid.coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + [f"x{i}" for i in range(k.grid.ndim)] + ["edge_weight"])
        for i, (p, h) in enumerate(zip(result.cycle, result.weights)):
            w.writerow([i] + [repr(float(c)) for c in xs[p]] + [repr(h)])
