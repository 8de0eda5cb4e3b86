"""Mechanical and tabulated Lagrangians, their Hamiltonians, and discrete
Legendre-Fenchel transforms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import PeriodicGrid


class ModelError(ValueError):
    pass


class RangeTooSmallError(ModelError):
    """Maximizer of a discrete conjugate sits on the edge of the sample range."""


# -- potentials ---------------------------------------------------------------

def zero_potential(x: np.ndarray) -> np.ndarray:
    return np.zeros(np.shape(x)[:-1])


def cosine_potential(amplitude: float = 1.0, axes=(0,)) -> Callable:
    """``U(x) = amplitude * sum(cos(x[a]) for a in axes)``."""
    axes = tuple(axes)

    def U(x):
        x = np.asarray(x, dtype=float)
        return amplitude * np.sum(np.cos(x[..., list(axes)]), axis=-1)

    return U


class TabulatedPotential:
    """Periodic multilinear interpolation of samples on a grid.

    ``values`` are given in the grid's row-major order.
    """

    def __init__(self, grid: PeriodicGrid, values):
        values = np.asarray(values, dtype=float).reshape(grid.dims)
        if not np.all(np.isfinite(values)):
            raise ModelError("tabulated potential has non-finite samples")
        self.grid = grid
        self.table = values

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        x = x.reshape(-1, self.grid.ndim)
        s = x / self.grid.spacing
        base = np.floor(s).astype(int)
        frac = s - base
        out = np.zeros(len(x))
        dims = np.asarray(self.grid.dims)
        # sum over the 2**d corners of the enclosing cell
        for corner in np.ndindex(*(2,) * self.grid.ndim):
            c = np.asarray(corner)
            idx = np.mod(base + c, dims)
            w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
            out += w * self.table[tuple(idx.T)]
        return out.reshape(lead)


# -- models -------------------------------------------------------------------

@dataclass(frozen=True)
class LagrangianModel:
    """``L(x, v) = 1/2 v.A v - U(x) - P.v``.

    ``kind`` is ``"mechanical"`` for closed-form potentials and
    ``"tabulated"`` when ``potential`` interpolates samples.
    """

    potential: Callable = zero_potential
    kinetic: np.ndarray = field(default_factory=lambda: np.eye(1))
    shift: Optional[np.ndarray] = None
    kind: str = "mechanical"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.kinetic, dtype=float))
        if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
            raise ModelError("kinetic form must be a symmetric matrix")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ModelError("kinetic form must be positive definite")
        P = np.zeros(A.shape[0]) if self.shift is None else np.asarray(self.shift, dtype=float).reshape(-1)
        if P.shape != (A.shape[0],) or not np.all(np.isfinite(P)):
            raise ModelError(f"shift must be a finite covector of length {A.shape[0]}")
        if self.kind not in ("mechanical", "tabulated"):
            raise ModelError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "kinetic", A)
        object.__setattr__(self, "shift", P)

    @property
    def ndim(self) -> int:
        return self.kinetic.shape[0]

    def with_shift(self, P) -> "LagrangianModel":
        return LagrangianModel(self.potential, self.kinetic, np.asarray(P, float), self.kind)

    def lagrangian(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        kin = 0.5 * np.einsum("...i,ij,...j->...", v, self.kinetic, v)
        return kin - self.potential(x) - v @ self.shift

    def hamiltonian(self, x, p) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q = np.asarray(p, dtype=float) + self.shift
        Ainv = np.linalg.inv(self.kinetic)
        return 0.5 * np.einsum("...i,ij,...j->...", q, Ainv, q) + self.potential(x)

    def momentum(self, x, v) -> np.ndarray:
        """Fiber derivative dL/dv (exact)."""
        return np.asarray(v, dtype=float) @ self.kinetic - self.shift

    def velocity_gradient(self, x, v, step: float = 1e-5) -> np.ndarray:
        """dL/dv by central differences, for checking against ``momentum``."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.empty(np.broadcast(x, v).shape)
        for i in range(self.ndim):
            e = np.zeros(self.ndim)
            e[i] = step
            out[..., i] = (self.lagrangian(x, v + e) - self.lagrangian(x, v - e)) / (2 * step)
        return out


def free_model(ndim: int = 1) -> LagrangianModel:
    return LagrangianModel(zero_potential, np.eye(ndim))


def pendulum_model(ndim: int = 1, amplitude: float = 1.0, shift=None) -> LagrangianModel:
    """``v^2/2 - amplitude*cos(x_0)``; extra axes are free directions."""
    return LagrangianModel(cosine_potential(amplitude, (0,)), np.eye(ndim), shift)


def eval_lagrangian(model: LagrangianModel, x, v) -> float:
    """Shifted Lagrangian at a single point, rejecting non-finite results."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise ModelError("non-finite position or velocity")
    val = float(model.lagrangian(np.atleast_1d(x), np.atleast_1d(v)))
    if not np.isfinite(val):
        raise ModelError(f"Lagrangian is not finite at x={x}, v={v}")
    return val


def eval_hamiltonian(model: LagrangianModel, x, p) -> float:
    val = float(model.hamiltonian(np.atleast_1d(x), np.atleast_1d(p)))
    if not np.isfinite(val):
        raise ModelError(f"Hamiltonian is not finite at x={x}, p={p}")
    return val


# -- sampled checks -----------------------------------------------------------

def _box(model, xs, vs):
    xs = np.asarray(xs, dtype=float).reshape(-1, model.ndim)
    vs = np.asarray(vs, dtype=float).reshape(-1, model.ndim)
    return xs[:, None, :], vs[None, :, :]


def check_superlinearity(model: LagrangianModel, K: float, xs, vs) -> float:
    """Worst constant ``C_K`` with ``L(x, v) >= K|v| + C_K`` on the sample box."""
    X, V = _box(model, xs, vs)
    vals = model.lagrangian(X, V) - K * np.linalg.norm(V, axis=-1)
    return float(vals.min())


def check_convexity(model: LagrangianModel, xs, ps) -> float:
    """Smallest second difference of ``p -> H(x, p)`` along each axis.

    ``ps`` must be a uniform 1-D momentum range; it is swept along every axis
    with the other components held at zero. Negative output falsifies
    convexity on the box.
    """
    ps = np.asarray(ps, dtype=float)
    xs = np.asarray(xs, dtype=float).reshape(-1, model.ndim)
    worst = np.inf
    for i in range(model.ndim):
        P = np.zeros((len(ps), model.ndim))
        P[:, i] = ps
        H = model.hamiltonian(xs[:, None, :], P[None, :, :])
        worst = min(worst, float(np.diff(H, 2, axis=1).min()))
    return worst


# -- discrete Legendre-Fenchel ------------------------------------------------

def _lower_hull(p, f):
    """Indices of the lower convex hull of the points (p_i, f_i), p sorted."""
    hull = []
    for i in range(len(p)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it lies on or above the chord a-i
            if (f[b] - f[a]) * (p[i] - p[a]) >= (f[i] - f[a]) * (p[b] - p[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def legendre_transform(f, p, v, *, return_argmax: bool = False, check_range: bool = True):
    """``g(v_j) = max_i [p_i v_j - f_i]`` in linear time.

    Parameters
    ----------
    f : array_like
        Samples on the increasing grid ``p`` (at least 3 points).
    p : array_like
        Sample abscissae, strictly increasing.
    v : array_like
        Evaluation points; any order.
    return_argmax : bool
        Also return the maximizing sample index per ``v``.
    check_range : bool
        Raise :class:`RangeTooSmallError` if a maximizer is a boundary sample.

    Notes
    -----
    The lower hull of the samples is built by a monotone stack, then the
    sorted ``v`` are merged against the hull's breakpoint slopes. Each hull
    vertex is compared with its two hull neighbours before being accepted, so
    the result agrees with the quadratic-time maximum to the last bit.
    """
    f = np.asarray(f, dtype=float)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if f.ndim != 1 or f.shape != p.shape or len(f) < 3:
        raise ModelError("need at least 3 samples with matching abscissae")
    if np.any(np.diff(p) <= 0):
        raise ModelError("sample abscissae must be strictly increasing")
    hull = _lower_hull(p, f)
    hp, hf = p[hull], f[hull]
    slopes = np.diff(hf) / np.diff(hp)
    order = np.argsort(v, kind="stable")
    g = np.empty(len(v))
    arg = np.empty(len(v), dtype=int)
    k = 0
    m = len(hull)
    for j in order:
        vj = v[j]
        while k < m - 1 and slopes[k] < vj:
            k += 1
        best_i, best = hull[k], p[hull[k]] * vj - f[hull[k]]
        for kk in (k - 1, k + 1):
            if 0 <= kk < m:
                i = hull[kk]
                val = p[i] * vj - f[i]
                if val > best or (val == best and i < best_i):
                    best_i, best = i, val
        g[j] = best
        arg[j] = best_i
    if check_range and np.any((arg == 0) | (arg == len(p) - 1)):
        bad = v[(arg == 0) | (arg == len(p) - 1)]
        raise RangeTooSmallError(
            f"maximizer on the sample boundary for v in [{bad.min()}, {bad.max()}]; widen the p range"
        )
    return (g, arg) if return_argmax else g


def legendre_transform_bruteforce(f, p, v):
    """Quadratic-time reference: explicit maximum over all samples."""
    f = np.asarray(f, dtype=float)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    vals = p[None, :] * v[:, None] - f[None, :]
    return vals.max(axis=1)
